//! Out-of-sample prediction and cross-validated evaluation.
//!
//! The methodology is the usual supervised-embedding loop: fit an embedding
//! on a training fold, learn per-coordinate maps `phi_i: x -> z_i` and a
//! response map `psi: z -> y`, then predict unseen rows as `psi(phi(x*))`.
//! Kernel ridge regression with an RBF kernel plays the regressor role:
//! closed form, deterministic, no tuning loop. Bandwidths default to the
//! median pairwise distance of the regressor's inputs and the ridge to
//! `1e-3 * n`; both are recorded in run metadata by the CLI.
//!
//! Errors are reported as RMS in *scaled* response units (the response is
//! min-max scaled by default), which keeps magnitudes comparable across
//! datasets and methods.

use std::fmt;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, DEFAULT_SLICES};
use crate::dcor::DataMatrix;
use crate::error::{Error, Result};
use crate::numerics;
use crate::solver::{discomax, GmmTrace, SolverConfig};

/// Column scaling flavor. `None` passes values through untouched (constant
/// columns are still dropped so downstream variance assumptions hold).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleKind {
    ZScore,
    MinMax,
    None,
}

impl ScaleKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zscore" => Ok(Self::ZScore),
            "minmax" => Ok(Self::MinMax),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidParameter(format!(
                "unknown scale kind '{other}' (expected zscore, minmax or none)"
            ))),
        }
    }
}

impl fmt::Display for ScaleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ZScore => "zscore",
            Self::MinMax => "minmax",
            Self::None => "none",
        })
    }
}

/// Per-column affine scaler `x' = (x - offset) / scale`, fit on training
/// data. Constant columns are either dropped (default) or retained mapping
/// to zero (`fit_keep_all`), depending on whether column identity matters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scaler {
    kind: ScaleKind,
    offsets: Vec<f64>,
    scales: Vec<f64>,
    kept: Vec<usize>,
    input_cols: usize,
    dropped: usize,
}

impl Scaler {
    /// Fits on `x`, dropping constant columns. Errors with [`Error::AllConstant`]
    /// if nothing remains.
    pub fn fit(x: &Array2<f64>, kind: ScaleKind) -> Result<Self> {
        Self::fit_impl(x, kind, false)
    }

    /// Fits on `x` keeping constant columns (they transform to exactly 0).
    /// Used for embeddings, whose column count must survive scaling.
    pub fn fit_keep_all(x: &Array2<f64>, kind: ScaleKind) -> Result<Self> {
        Self::fit_impl(x, kind, true)
    }

    fn fit_impl(x: &Array2<f64>, kind: ScaleKind, keep_all: bool) -> Result<Self> {
        let (n, p) = x.dim();
        if n == 0 || p == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: n });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "scaler input",
            });
        }
        let mut offsets = Vec::new();
        let mut scales = Vec::new();
        let mut kept = Vec::new();
        let mut dropped = 0usize;
        for j in 0..p {
            let col = x.column(j);
            let (offset, scale) = match kind {
                ScaleKind::ZScore => {
                    let mean = col.sum() / n as f64;
                    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                        / n as f64;
                    (mean, var.sqrt())
                }
                ScaleKind::MinMax => {
                    let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
                    let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (min, max - min)
                }
                ScaleKind::None => (0.0, 1.0),
            };
            let magnitude = col.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            let spread = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| {
                (a.0.min(v), a.1.max(v))
            });
            let constant = (spread.1 - spread.0) <= 1e-12 * magnitude;
            if constant && !keep_all {
                dropped += 1;
                continue;
            }
            kept.push(j);
            if constant {
                // Retained constant column: center it away and leave the
                // scale harmless.
                offsets.push(col[0]);
                scales.push(1.0);
            } else {
                offsets.push(offset);
                scales.push(if scale > 0.0 { scale } else { 1.0 });
            }
        }
        if kept.is_empty() {
            return Err(Error::AllConstant);
        }
        Ok(Self {
            kind,
            offsets,
            scales,
            kept,
            input_cols: p,
            dropped,
        })
    }

    pub fn kind(&self) -> ScaleKind {
        self.kind
    }

    /// Number of columns the transform produces.
    pub fn n_kept(&self) -> usize {
        self.kept.len()
    }

    /// Constant columns discarded during the fit.
    pub fn n_dropped(&self) -> usize {
        self.dropped
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_cols {
            return Err(Error::DimensionMismatch {
                expected: self.input_cols,
                got: x.ncols(),
                context: "scaler input columns",
            });
        }
        let n = x.nrows();
        let mut out = Array2::zeros((n, self.kept.len()));
        for (c, &j) in self.kept.iter().enumerate() {
            let off = self.offsets[c];
            let inv = 1.0 / self.scales[c];
            for i in 0..n {
                out[[i, c]] = (x[[i, j]] - off) * inv;
            }
        }
        Ok(out)
    }

    /// Inverse of [`Scaler::transform`] on the retained columns (dropped
    /// constant columns are not reconstructed).
    pub fn inverse(&self, s: &Array2<f64>) -> Result<Array2<f64>> {
        if s.ncols() != self.kept.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kept.len(),
                got: s.ncols(),
                context: "scaler inverse columns",
            });
        }
        let n = s.nrows();
        let mut out = Array2::zeros((n, self.kept.len()));
        for c in 0..self.kept.len() {
            for i in 0..n {
                out[[i, c]] = s[[i, c]] * self.scales[c] + self.offsets[c];
            }
        }
        Ok(out)
    }

    pub fn transform_column(&self, y: &Array1<f64>) -> Result<Array1<f64>> {
        let col = self.transform(&to_column(y))?;
        Ok(col.column(0).to_owned())
    }

    pub fn inverse_column(&self, s: &Array1<f64>) -> Result<Array1<f64>> {
        let col = self.inverse(&to_column(s))?;
        Ok(col.column(0).to_owned())
    }
}

fn to_column(y: &Array1<f64>) -> Array2<f64> {
    let n = y.len();
    Array2::from_shape_fn((n, 1), |(i, _)| y[i])
}

/// RBF kernel matrix `exp(-|a_i - b_j|^2 / (2 sigma^2))`, one row per row
/// of `a`, one column per row of `b`.
pub fn rbf_kernel(a: &Array2<f64>, b: &Array2<f64>, sigma: f64) -> Result<Array2<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: b.ncols(),
            context: "kernel operand columns",
        });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(
            "kernel bandwidth must be positive and finite".into(),
        ));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let (m, n, p) = (a.nrows(), b.nrows(), a.ncols());
    let mut k = Array2::zeros((m, n));
    for i in 0..m {
        for j in 0..n {
            let mut d2 = 0.0;
            for c in 0..p {
                let d = a[[i, c]] - b[[j, c]];
                d2 += d * d;
            }
            k[[i, j]] = (-d2 * inv).exp();
        }
    }
    Ok(k)
}

/// Median pairwise Euclidean distance of the rows; the standard bandwidth
/// heuristic. Falls back to 1.0 when every pair coincides (or n < 2).
pub fn median_heuristic(x: &Array2<f64>) -> f64 {
    let n = x.nrows();
    if n < 2 {
        return 1.0;
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d2 = 0.0;
            for c in 0..x.ncols() {
                let d = x[[i, c]] - x[[j, c]];
                d2 += d * d;
            }
            dists.push(d2.sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Fitted RBF kernel ridge regressor: dual coefficients solving
/// `(K + lambda I) c = targets` over the stored training inputs.
#[derive(Debug, Clone)]
pub struct KernelRegressor {
    train_x: Array2<f64>,
    coeffs: Array1<f64>,
    pub sigma: f64,
    pub lambda: f64,
}

/// Fits one regressor per column of `targets`, sharing a single kernel
/// factorization.
pub fn krr_fit_multi(
    x: &Array2<f64>,
    targets: &Array2<f64>,
    sigma: f64,
    lambda: f64,
) -> Result<Vec<KernelRegressor>> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if targets.nrows() != n {
        return Err(Error::SampleCountMismatch {
            left: n,
            right: targets.nrows(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(
            "ridge strength must be non-negative and finite".into(),
        ));
    }
    let mut k = rbf_kernel(x, x, sigma)?;
    for i in 0..n {
        k[[i, i]] += lambda;
    }
    let coeffs = numerics::chol_solve_multi(&k, targets)?;
    Ok((0..targets.ncols())
        .map(|j| KernelRegressor {
            train_x: x.clone(),
            coeffs: coeffs.column(j).to_owned(),
            sigma,
            lambda,
        })
        .collect())
}

pub fn krr_fit(
    x: &Array2<f64>,
    targets: &Array1<f64>,
    sigma: f64,
    lambda: f64,
) -> Result<KernelRegressor> {
    let mut models = krr_fit_multi(x, &to_column(targets), sigma, lambda)?;
    Ok(models.remove(0))
}

pub fn krr_predict(model: &KernelRegressor, x_star: &Array2<f64>) -> Result<Array1<f64>> {
    let k = rbf_kernel(x_star, &model.train_x, model.sigma)?;
    Ok(k.dot(&model.coeffs))
}

/// Default ridge strength for the kernel maps.
pub fn default_krr_lambda(n: usize) -> f64 {
    1e-3 * n as f64
}

/// A trained embedding plus everything needed to replay it on unseen rows:
/// per-coordinate maps `phi_i: x -> z_i`, the response map `psi: z -> y`,
/// and the scalers that defined their coordinate systems.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    /// The training embedding, in the solver's (unscaled) coordinates.
    pub z_train: Array2<f64>,
    pub phi: Vec<KernelRegressor>,
    pub psi: KernelRegressor,
    pub scaler_x: Scaler,
    pub scaler_z: Scaler,
    pub scaler_y: Scaler,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    /// Out-of-sample embedding of raw rows, in the scaled-z coordinates the
    /// maps were trained on.
    pub fn embed(&self, x_new: &Array2<f64>) -> Result<Array2<f64>> {
        let xs = self.scaler_x.transform(x_new)?;
        let mut z = Array2::zeros((x_new.nrows(), self.phi.len()));
        for (j, phi) in self.phi.iter().enumerate() {
            let col = krr_predict(phi, &xs)?;
            z.column_mut(j).assign(&col);
        }
        Ok(z)
    }

    /// `psi(phi(x*))` in scaled response units. In-sample rows take the same
    /// path as unseen ones — predictions never shortcut through `z_train`.
    pub fn predict_scaled(&self, x_new: &Array2<f64>) -> Result<Array1<f64>> {
        let z = self.embed(x_new)?;
        krr_predict(&self.psi, &z)
    }

    /// Predictions in original response units.
    pub fn predict(&self, x_new: &Array2<f64>) -> Result<Array1<f64>> {
        let s = self.predict_scaled(x_new)?;
        self.scaler_y.inverse_column(&s)
    }
}

/// Fits the map stack around a given training embedding: z-scored features,
/// z-scored embedding coordinates, response scaled per `response_scale`.
pub fn fit_maps(
    x_raw: &Array2<f64>,
    z_train: &Array2<f64>,
    y_raw: &Array1<f64>,
    response_scale: ScaleKind,
) -> Result<EmbeddingModel> {
    let n = x_raw.nrows();
    if z_train.nrows() != n || y_raw.len() != n {
        return Err(Error::SampleCountMismatch {
            left: n,
            right: z_train.nrows().min(y_raw.len()),
        });
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let scaler_x = Scaler::fit(x_raw, ScaleKind::ZScore)?;
    let scaler_z = Scaler::fit_keep_all(z_train, ScaleKind::ZScore)?;
    let scaler_y = Scaler::fit(&to_column(y_raw), response_scale)?;
    let xs = scaler_x.transform(x_raw)?;
    let zs = scaler_z.transform(z_train)?;
    let ys = scaler_y.transform_column(y_raw)?;

    let lambda = default_krr_lambda(n);
    let phi = krr_fit_multi(&xs, &zs, median_heuristic(&xs), lambda)?;
    let psi = krr_fit(&zs, &ys, median_heuristic(&zs), lambda)?;
    Ok(EmbeddingModel {
        z_train: z_train.clone(),
        phi,
        psi,
        scaler_x,
        scaler_z,
        scaler_y,
    })
}

/// Runs the distance-correlation solver on z-scored features, then fits the
/// out-of-sample maps around the resulting embedding. Returns the model and
/// the solver's convergence trace.
pub fn fit_embedding_model(
    x: &DataMatrix,
    y: &DataMatrix,
    config: &SolverConfig,
    response_scale: ScaleKind,
) -> Result<(EmbeddingModel, GmmTrace)> {
    if y.p() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: y.p(),
            context: "pipeline response columns",
        });
    }
    let scaler_x = Scaler::fit(x.as_array(), ScaleKind::ZScore)?;
    let xs = scaler_x.transform(x.as_array())?;
    // The response enters the solver unscaled: distance correlation is
    // invariant to affine response scaling, so only the features need it.
    let fit = discomax(&DataMatrix::new(xs)?, y, config)?;
    let y_col = y.as_array().column(0).to_owned();
    let model = fit_maps(x.as_array(), &fit.z, &y_col, response_scale)?;
    Ok((model, fit.trace))
}

/// Root mean squared difference.
pub fn rms(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    assert_eq!(a.len(), b.len(), "rms operands must share a length");
    let ss: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len() as f64).sqrt()
}

/// Deterministic k-fold assignment: indices shuffled by a seeded generator,
/// then split into contiguous chunks whose sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!(
            "fold count must satisfy 2 <= k <= n (k={k}, n={n})"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0usize;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[at..at + len].to_vec());
        at += len;
    }
    Ok(folds)
}

/// Dimension-reduction method evaluated by the CV harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Discomax,
    Sir,
    Save,
    /// No reduction: kernel ridge regression straight on the scaled features.
    Baseline,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Discomax, Method::Sir, Method::Save, Method::Baseline];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Discomax => "discomax",
            Self::Sir => "sir",
            Self::Save => "save",
            Self::Baseline => "baseline",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "discomax" => Ok(Self::Discomax),
            "sir" => Ok(Self::Sir),
            "save" => Ok(Self::Save),
            "baseline" => Ok(Self::Baseline),
            other => Err(Error::InvalidParameter(format!(
                "unknown method '{other}' (expected discomax, sir, save or baseline)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One (method, dimension) cell of the cross-validated RMS table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub method: Method,
    pub dim: usize,
    pub fold_rms: Vec<f64>,
    pub mean_rms: f64,
    pub std_rms: f64,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn take_rows(a: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    a.select(Axis(0), idx)
}

fn take(y: &Array1<f64>, idx: &[usize]) -> Array1<f64> {
    Array1::from_iter(idx.iter().map(|&i| y[i]))
}

/// Evaluates one (method, dim) cell over precomputed folds. Returns the cell
/// and, for the distance-correlation method, one convergence trace per fold.
///
/// Held-out RMS is computed in scaled response units with all scalers fit on
/// the training fold only.
pub fn cv_single(
    x: &Array2<f64>,
    y: &Array1<f64>,
    method: Method,
    dim: usize,
    folds: &[Vec<usize>],
    config: &SolverConfig,
    response_scale: ScaleKind,
) -> Result<(CvCell, Vec<GmmTrace>)> {
    let mut fold_rms = Vec::with_capacity(folds.len());
    let mut traces = Vec::new();
    for f in 0..folds.len() {
        let test = &folds[f];
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        let x_tr = take_rows(x, &train);
        let y_tr = take(y, &train);
        let x_te = take_rows(x, test);
        let y_te = take(y, test);

        let r = match method {
            Method::Discomax => {
                let cfg = SolverConfig {
                    dim,
                    ..config.clone()
                };
                let (model, trace) = fit_embedding_model(
                    &DataMatrix::new(x_tr)?,
                    &DataMatrix::new(to_column(&y_tr))?,
                    &cfg,
                    response_scale,
                )?;
                traces.push(trace);
                let yhat = model.predict_scaled(&x_te)?;
                let ys_te = model.scaler_y.transform_column(&y_te)?;
                rms(&yhat, &ys_te)
            }
            Method::Sir | Method::Save => {
                let scaler_x = Scaler::fit(&x_tr, ScaleKind::ZScore)?;
                let xs_tr = scaler_x.transform(&x_tr)?;
                let xs_te = scaler_x.transform(&x_te)?;
                let proj = match method {
                    Method::Sir => baselines::sir(&xs_tr, &y_tr, dim, DEFAULT_SLICES)?,
                    _ => baselines::save(&xs_tr, &y_tr, dim, DEFAULT_SLICES)?,
                };
                // Linear methods embed test rows exactly; no fitted maps
                // are needed.
                let z_tr = baselines::project(&xs_tr, &proj)?;
                let z_te = baselines::project(&xs_te, &proj)?;
                let scaler_y = Scaler::fit(&to_column(&y_tr), response_scale)?;
                let ys_tr = scaler_y.transform_column(&y_tr)?;
                let ys_te = scaler_y.transform_column(&y_te)?;
                let psi = krr_fit(
                    z_tr.as_array(),
                    &ys_tr,
                    median_heuristic(z_tr.as_array()),
                    default_krr_lambda(train.len()),
                )?;
                let yhat = krr_predict(&psi, z_te.as_array())?;
                rms(&yhat, &ys_te)
            }
            Method::Baseline => {
                let scaler_x = Scaler::fit(&x_tr, ScaleKind::ZScore)?;
                let xs_tr = scaler_x.transform(&x_tr)?;
                let xs_te = scaler_x.transform(&x_te)?;
                let scaler_y = Scaler::fit(&to_column(&y_tr), response_scale)?;
                let ys_tr = scaler_y.transform_column(&y_tr)?;
                let ys_te = scaler_y.transform_column(&y_te)?;
                let reg = krr_fit(
                    &xs_tr,
                    &ys_tr,
                    median_heuristic(&xs_tr),
                    default_krr_lambda(train.len()),
                )?;
                let yhat = krr_predict(&reg, &xs_te)?;
                rms(&yhat, &ys_te)
            }
        };
        fold_rms.push(r);
    }
    let (mean_rms, std_rms) = mean_and_std(&fold_rms);
    Ok((
        CvCell {
            method,
            dim,
            fold_rms,
            mean_rms,
            std_rms,
        },
        traces,
    ))
}

/// Cross-validates one method over a dimension grid with folds derived
/// deterministically from the seed. The baseline ignores `dims` (it has no
/// reduction step) and reports a single full-dimension cell.
pub fn kfold_cv(
    x: &Array2<f64>,
    y: &Array1<f64>,
    method: Method,
    dims: &[usize],
    k: usize,
    seed: u64,
    config: &SolverConfig,
    response_scale: ScaleKind,
) -> Result<Vec<CvCell>> {
    let folds = kfold_indices(x.nrows(), k, seed)?;
    let grid: Vec<usize> = if method == Method::Baseline {
        vec![x.ncols()]
    } else {
        dims.to_vec()
    };
    grid.into_iter()
        .map(|d| cv_single(x, y, method, d, &folds, config, response_scale).map(|(c, _)| c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;

    fn random_matrix(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn minmax_maps_to_unit_interval() {
        let x = array![[0.0], [2.0]];
        let s = Scaler::fit(&x, ScaleKind::MinMax).unwrap();
        let t = s.transform(&x).unwrap();
        assert_eq!(t, array![[0.0], [1.0]]);
        let back = s.inverse(&t).unwrap();
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zscore_round_trips_and_standardizes() {
        let x = random_matrix(40, 3, 5);
        let s = Scaler::fit(&x, ScaleKind::ZScore).unwrap();
        let t = s.transform(&x).unwrap();
        for j in 0..3 {
            let col = t.column(j);
            let mean = col.sum() / 40.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 40.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-10);
        }
        let back = s.inverse(&t).unwrap();
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_columns_are_dropped_or_kept_as_zero() {
        let mut x = random_matrix(10, 3, 6);
        x.column_mut(1).fill(7.0);

        let s = Scaler::fit(&x, ScaleKind::ZScore).unwrap();
        assert_eq!(s.n_kept(), 2);
        assert_eq!(s.n_dropped(), 1);
        assert_eq!(s.transform(&x).unwrap().ncols(), 2);

        let s = Scaler::fit_keep_all(&x, ScaleKind::ZScore).unwrap();
        assert_eq!(s.n_kept(), 3);
        let t = s.transform(&x).unwrap();
        for v in t.column(1).iter() {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn all_constant_input_is_rejected() {
        let x = Array2::from_elem((5, 2), 3.0);
        assert!(matches!(
            Scaler::fit(&x, ScaleKind::ZScore),
            Err(Error::AllConstant)
        ));
    }

    #[test]
    fn none_kind_passes_values_through() {
        let x = random_matrix(8, 2, 7);
        let s = Scaler::fit(&x, ScaleKind::None).unwrap();
        let t = s.transform(&x).unwrap();
        assert_eq!(t, x);
    }

    #[test]
    fn rbf_kernel_closed_forms() {
        let a = random_matrix(6, 2, 8);
        let k = rbf_kernel(&a, &a, 1.3).unwrap();
        for i in 0..6 {
            assert!((k[[i, i]] - 1.0).abs() < 1e-14);
            for j in 0..6 {
                assert!((k[[i, j]] - k[[j, i]]).abs() < 1e-14);
                assert!(k[[i, j]] > 0.0 && k[[i, j]] <= 1.0);
            }
        }

        // |a - b|^2 = 2 sigma^2 gives exactly exp(-1).
        let sigma = 0.7f64;
        let a = array![[0.0]];
        let b = array![[(2.0 * sigma * sigma).sqrt()]];
        let k = rbf_kernel(&a, &b, sigma).unwrap();
        assert!((k[[0, 0]] - (-1.0f64).exp()).abs() < 1e-12);

        let bad = rbf_kernel(&a, &random_matrix(3, 2, 9), sigma);
        assert!(matches!(bad, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn median_heuristic_basics() {
        let x = array![[0.0], [3.0]];
        assert!((median_heuristic(&x) - 3.0).abs() < 1e-12);
        let same = Array2::from_elem((4, 2), 1.0);
        assert_eq!(median_heuristic(&same), 1.0);
    }

    #[test]
    fn krr_interpolates_with_tiny_ridge() {
        let x = array![[0.0], [1.0], [2.5], [4.0], [5.5]];
        let t = array![1.0, -0.5, 2.0, 0.0, 1.5];
        let m = krr_fit(&x, &t, 1.0, 1e-10).unwrap();
        let p = krr_predict(&m, &x).unwrap();
        for (a, b) in p.iter().zip(t.iter()) {
            assert!((a - b).abs() < 1e-6, "interpolation off: {a} vs {b}");
        }
    }

    #[test]
    fn krr_single_point_reproduces_its_target() {
        let x = array![[2.0, 3.0]];
        let t = array![5.0];
        let m = krr_fit(&x, &t, 1.0, 1e-10).unwrap();
        let p = krr_predict(&m, &x).unwrap();
        assert!((p[0] - 5.0).abs() < 1e-8);
    }

    #[test]
    fn krr_is_invariant_to_training_row_order() {
        let x = random_matrix(12, 2, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let t = Array1::from_shape_fn(12, |i| x[[i, 0]].sin() + 0.1 * rng.random_range(-1.0..1.0));
        let x_star = random_matrix(4, 2, 11);

        let m1 = krr_fit(&x, &t, 0.8, 1e-3).unwrap();
        let p1 = krr_predict(&m1, &x_star).unwrap();

        let perm: Vec<usize> = vec![5, 2, 9, 0, 11, 3, 7, 1, 10, 4, 8, 6];
        let xp = take_rows(&x, &perm);
        let tp = take(&t, &perm);
        let m2 = krr_fit(&xp, &tp, 0.8, 1e-3).unwrap();
        let p2 = krr_predict(&m2, &x_star).unwrap();
        for (a, b) in p1.iter().zip(p2.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn kfold_partitions_evenly_and_deterministically() {
        let folds = kfold_indices(23, 5, 42).unwrap();
        assert_eq!(folds.len(), 5);
        let mut sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![4, 4, 5, 5, 5]);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());

        assert_eq!(folds, kfold_indices(23, 5, 42).unwrap());
        assert_ne!(folds, kfold_indices(23, 5, 43).unwrap());

        assert!(kfold_indices(10, 1, 0).is_err());
        assert!(kfold_indices(3, 4, 0).is_err());
    }

    #[test]
    fn fit_maps_builds_one_phi_per_coordinate() {
        let x = random_matrix(30, 4, 12);
        let z = random_matrix(30, 3, 13);
        let y = Array1::from_shape_fn(30, |i| x[[i, 0]] + x[[i, 1]]);
        let model = fit_maps(&x, &z, &y, ScaleKind::MinMax).unwrap();
        assert_eq!(model.dim(), 3);

        // The prediction path must run through phi, not the stored z_train.
        let via_phi = krr_predict(&model.psi, &model.embed(&x).unwrap()).unwrap();
        let direct = model.predict_scaled(&x).unwrap();
        for (a, b) in via_phi.iter().zip(direct.iter()) {
            assert_eq!(a, b);
        }

        // predict() returns original units.
        let y_hat = model.predict(&x).unwrap();
        let back = model
            .scaler_y
            .inverse_column(&model.predict_scaled(&x).unwrap())
            .unwrap();
        for (a, b) in y_hat.iter().zip(back.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn linear_toy_end_to_end() {
        let n = 60;
        let x = random_matrix(n, 3, 14);
        let y = Array1::from_shape_fn(n, |i| 2.0 * x[[i, 0]]);
        let cfg = SolverConfig {
            dim: 2,
            max_outer: 15,
            ..SolverConfig::default()
        };
        let (model, trace) = fit_embedding_model(
            &DataMatrix::new(x.clone()).unwrap(),
            &DataMatrix::new(to_column(&y)).unwrap(),
            &cfg,
            ScaleKind::MinMax,
        )
        .unwrap();
        assert!(!trace.records.is_empty());

        let yhat = model.predict_scaled(&x).unwrap();
        let ys = model.scaler_y.transform_column(&y).unwrap();
        let err = rms(&yhat, &ys);
        assert!(err <= 0.05, "train RMS too high: {err}");

        // Refit is bitwise deterministic.
        let (model2, _) = fit_embedding_model(
            &DataMatrix::new(x.clone()).unwrap(),
            &DataMatrix::new(to_column(&y)).unwrap(),
            &cfg,
            ScaleKind::MinMax,
        )
        .unwrap();
        assert_eq!(model.z_train, model2.z_train);
    }

    #[test]
    fn constant_prediction_rms_is_response_std() {
        let y = array![0.0, 1.0, 2.0, 3.0];
        let mean = y.sum() / 4.0;
        let constant = Array1::from_elem(4, mean);
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert!((rms(&constant, &y) - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cv_cells_are_deterministic() {
        let x = random_matrix(40, 4, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let y = Array1::from_shape_fn(40, |i| {
            x[[i, 0]] + 0.5 * x[[i, 1]] + 0.01 * rng.random_range(-1.0..1.0)
        });
        let folds = kfold_indices(40, 4, 7).unwrap();
        let cfg = SolverConfig::default();
        let (c1, _) = cv_single(&x, &y, Method::Baseline, 4, &folds, &cfg, ScaleKind::MinMax)
            .unwrap();
        let (c2, _) = cv_single(&x, &y, Method::Baseline, 4, &folds, &cfg, ScaleKind::MinMax)
            .unwrap();
        assert_eq!(c1, c2);
        assert_eq!(c1.fold_rms.len(), 4);
        assert!(c1.mean_rms.is_finite() && c1.mean_rms > 0.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert!(Method::parse("pca").is_err());
    }
}
