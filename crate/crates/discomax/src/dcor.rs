//! Sample distance covariance and correlation (squared-distance flavor),
//! plus the double-centered distance matrices and data Laplacians the solver
//! is built on.
//!
//! For data X (n x p) the squared-distance matrix E has entries
//! `||x_k - x_l||^2`. Double centering with J = I - (1/n) 11^T gives
//! `E_hat = J E J`, and the Laplacian of the (zero-row-sum) weight matrix
//! E_hat is `L = -E_hat`, which is PSD and equals twice the Gram matrix of
//! the column-centered data. Sample distance covariance is the normalized
//! Frobenius inner product of two double-centered matrices, and it can be
//! evaluated equivalently as a trace against the other variable's Laplacian;
//! both routes are exposed and cross-checked in tests.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// Column-major sample matrix (rows = observations) with validated finite
/// entries. `centered` records whether columns have been mean-centered.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    data: Array2<f64>,
    centered: bool,
}

impl DataMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "data matrix must have at least one row and column".into(),
            ));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "data matrix entries",
            });
        }
        Ok(Self {
            data,
            centered: false,
        })
    }

    /// Single-column matrix from a response vector.
    pub fn from_column(y: Array1<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(y.into_shape_with_order((n, 1)).expect("column reshape"))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Column-centered copy (idempotent: returns a clone if already centered).
    pub fn centered(&self) -> DataMatrix {
        if self.centered {
            return self.clone();
        }
        DataMatrix {
            data: center_columns(&self.data),
            centered: true,
        }
    }
}

/// Subtracts each column's mean.
pub fn center_columns(a: &Array2<f64>) -> Array2<f64> {
    let means = a.mean_axis(Axis(0)).expect("non-empty rows");
    a - &means
}

/// Double-centered squared-distance matrix `J E J`; rows and columns sum to
/// (numerical) zero, which construction enforces.
#[derive(Debug, Clone)]
pub struct CenteredDistanceMatrix {
    entries: Array2<f64>,
}

impl CenteredDistanceMatrix {
    fn new(entries: Array2<f64>) -> Result<Self> {
        let n = entries.nrows();
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let tol = n as f64 * 1e-10 * scale;
        for sum in entries.sum_axis(Axis(1)).iter() {
            if sum.abs() > tol {
                return Err(Error::InvalidParameter(
                    "double-centered matrix has a non-zero row sum".into(),
                ));
            }
        }
        for sum in entries.sum_axis(Axis(0)).iter() {
            if sum.abs() > tol {
                return Err(Error::InvalidParameter(
                    "double-centered matrix has a non-zero column sum".into(),
                ));
            }
        }
        Ok(Self { entries })
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.entries
    }
}

/// Data Laplacian: symmetric PSD, zero row sums, `L = -J E J = 2 X~ X~^T`.
#[derive(Debug, Clone)]
pub struct Laplacian {
    entries: Array2<f64>,
}

impl Laplacian {
    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Diagonal as a vector.
    pub fn diag(&self) -> Array1<f64> {
        self.entries.diag().to_owned()
    }
}

#[cfg(test)]
pub(crate) fn laplacian_from_raw_for_tests(entries: Array2<f64>) -> Laplacian {
    Laplacian { entries }
}

/// Pairwise squared Euclidean distances `E[k, l] = ||x_k - x_l||^2`,
/// computed by direct differencing (exactly symmetric, zero diagonal).
pub fn squared_distance_matrix(x: &DataMatrix) -> Result<Array2<f64>> {
    let n = x.n();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let a = x.as_array();
    let mut e = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        for l in (k + 1)..n {
            let mut d2 = 0.0;
            for j in 0..x.p() {
                let diff = a[[k, j]] - a[[l, j]];
                d2 += diff * diff;
            }
            e[[k, l]] = d2;
            e[[l, k]] = d2;
        }
    }
    Ok(e)
}

/// Double centering `J E J` with the centering matrix `J = I - (1/n) 11^T`,
/// evaluated as `E[i,j] - rowmean_i - colmean_j + grandmean`.
pub fn double_center(e: &Array2<f64>) -> Result<CenteredDistanceMatrix> {
    let (r, c) = e.dim();
    if r != c {
        return Err(Error::NonSquare { rows: r, cols: c });
    }
    if !e.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            context: "distance matrix entries",
        });
    }
    let n = r as f64;
    let row_means = e.mean_axis(Axis(1)).expect("non-empty");
    let col_means = e.mean_axis(Axis(0)).expect("non-empty");
    let grand = e.sum() / (n * n);
    let mut out = e.clone();
    for i in 0..r {
        for j in 0..r {
            out[[i, j]] = e[[i, j]] - row_means[i] - col_means[j] + grand;
        }
    }
    CenteredDistanceMatrix::new(out)
}

/// Data Laplacian `L = D - E_hat` where `E_hat = J E J` and `D` is the
/// diagonal of E_hat's row sums. The row sums vanish, so `L = -E_hat`; the
/// result is symmetrized to strip rounding noise.
pub fn laplacian_from_data(x: &DataMatrix) -> Result<Laplacian> {
    let e = squared_distance_matrix(x)?;
    let ehat = double_center(&e)?;
    let neg = ehat.as_array().mapv(|v| -v);
    let sym = 0.5 * (&neg + &neg.t());
    Ok(Laplacian { entries: sym })
}

/// Sample squared distance covariance:
/// `(1/n^2) * sum_{k,l} E_hat_X[k,l] * E_hat_Y[k,l]`.
pub fn sample_dcov2(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    if x.n() != y.n() {
        return Err(Error::SampleCountMismatch {
            left: x.n(),
            right: y.n(),
        });
    }
    let ex = double_center(&squared_distance_matrix(x)?)?;
    let ey = double_center(&squared_distance_matrix(y)?)?;
    let n2 = (x.n() * x.n()) as f64;
    let dot: f64 = ex
        .as_array()
        .iter()
        .zip(ey.as_array().iter())
        .map(|(a, b)| a * b)
        .sum();
    Ok(dot / n2)
}

/// Sample squared distance correlation
/// `dcov2(X, Y) / sqrt(dcov2(X, X) * dcov2(Y, Y))`, defined as exactly 0
/// when either self-covariance vanishes (e.g. a constant sample).
pub fn sample_dcorr2(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    let vxx = sample_dcov2(x, x)?;
    let vyy = sample_dcov2(y, y)?;
    if vxx <= 0.0 || vyy <= 0.0 {
        return Ok(0.0);
    }
    let vxy = sample_dcov2(x, y)?;
    Ok(vxy / (vxx * vyy).sqrt())
}

/// Distance covariance through the Laplacian identity
/// `dcov2(X, Y) = (2/n^2) * Tr(X~^T L_Y X~)` with `X~` column-centered.
/// Centers `X` internally, so callers may pass raw data.
pub fn dcov2_via_laplacian(x: &DataMatrix, l_y: &Laplacian) -> Result<f64> {
    if x.n() != l_y.order() {
        return Err(Error::DimensionMismatch {
            expected: l_y.order(),
            got: x.n(),
            context: "rows of X vs Laplacian order",
        });
    }
    let xc = x.centered();
    let lx = l_y.as_array().dot(xc.as_array());
    let trace: f64 = xc.as_array().iter().zip(lx.iter()).map(|(a, b)| a * b).sum();
    let n2 = (x.n() * x.n()) as f64;
    Ok(2.0 * trace / n2)
}
