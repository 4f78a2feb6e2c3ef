//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the numerics, distance-correlation,
/// solver, pipeline, baseline and CLI layers.
#[derive(Error, Debug)]
pub enum Error {
    #[error("matrix contains a non-finite entry ({context})")]
    NonFinite { context: &'static str },

    #[error("eigensolver failed to converge within the iteration cap")]
    NonConvergence,

    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: &'static str },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("expected a square matrix, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("sample counts disagree: {left} vs {right}")]
    SampleCountMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("degenerate data: {context}")]
    DegenerateData { context: &'static str },

    #[error("candidate embedding has a degenerate self-distance trace")]
    DegenerateZ,

    #[error("surrogate denominator trace is not positive")]
    DegenerateDenominator,

    #[error("matrix pencil is degenerate ({context})")]
    DegeneratePencil { context: &'static str },

    #[error("embedding dimension {dim} is invalid for {n} samples (need 2 <= d < n)")]
    BadDimension { dim: usize, n: usize },

    #[error("solver made no progress: {context}")]
    NoProgress { context: &'static str },

    #[error("every column is constant; nothing left to scale")]
    AllConstant,

    #[error("linear system is singular ({context})")]
    SingularSystem { context: &'static str },

    #[error("response slice {slice} is empty")]
    EmptySlice { slice: usize },

    #[error("sample covariance is singular even after ridge regularization")]
    SingularCovariance,

    #[error("file not found: {path}")]
    FileNotFound { path: String },

    #[error("no numeric data columns found in {path}")]
    NoNumericColumns { path: String },

    #[error("response column {name:?} not present in the header")]
    ResponseColumnMissing { name: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json serialization failed: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
}
