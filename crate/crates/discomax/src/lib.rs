//! DisCoMax: supervised dimension reduction that finds a low-dimensional
//! embedding `Z` of a feature matrix `X` by maximizing the sum of squared
//! sample distance correlations `dcorr2(X, Z) + dcorr2(Z, y)`.
//!
//! The objective is a ratio of traces of data Laplacians, maximized by a
//! generalized minorization-maximization loop whose surrogate subproblems are
//! fractional programs; each one is solved with a golden-section search over a
//! Dinkelbach-style parameter and a contractive fixed-point iteration.
//!
//! Layering, bottom up:
//! - [`numerics`]: symmetric eigensolves, generalized eigenvalue extremes,
//!   PSD pseudo-inverse.
//! - [`dcor`]: distance matrices, double centering, data Laplacians, sample
//!   distance covariance/correlation.
//! - [`solver`]: the DisCoMax objective and the nested optimizer.
//! - [`pipeline`]: scaling, kernel ridge maps, out-of-sample prediction,
//!   k-fold cross-validation.
//! - [`baselines`]: sliced inverse regression (SIR) and sliced average
//!   variance estimation (SAVE).
//! - [`cli`]: experiment configuration, CSV loading, result reporting.

pub mod baselines;
pub mod cli;
pub mod dcor;
pub mod error;
pub mod numerics;
pub mod pipeline;
pub mod solver;

pub use error::{Error, Result};
