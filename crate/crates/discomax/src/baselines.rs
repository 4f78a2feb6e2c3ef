//! Sliced inverse-regression baselines: SIR and SAVE.
//!
//! Both estimate a linear projection `B` (p x d) from moments of `X`
//! conditioned on slices of the response: SIR from the first conditional
//! moment (slice means), SAVE from the second (slice covariances). The same
//! cross-validation harness that evaluates the distance-correlation
//! embedding consumes these projections via [`project`].

use ndarray::{Array1, Array2, Axis};

use crate::dcor::DataMatrix;
use crate::error::{Error, Result};
use crate::numerics::{self, SymMatrix};

/// Number of response slices used when the caller has no preference.
pub const DEFAULT_SLICES: usize = 10;

/// A fitted linear dimension reduction.
#[derive(Debug, Clone)]
pub struct Projection {
    /// p x d projection matrix; columns ordered by decreasing eigenvalue of
    /// the method's kernel matrix.
    pub b: Array2<f64>,
    pub slice_count: usize,
    /// Full (descending) spectrum of the kernel matrix, useful for judging
    /// how dominant the leading directions are.
    pub eigenvalues: Array1<f64>,
}

/// Population covariance of the rows of `x`.
fn covariance(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    let mean = x.mean_axis(Axis(0)).expect("non-empty input");
    let centered = x - &mean.view().insert_axis(Axis(0));
    centered.t().dot(&centered) / n
}

/// Symmetric inverse square root of `cov + ridge I`.
fn whitener(cov: &Array2<f64>, ridge: f64) -> Result<Array2<f64>> {
    let p = cov.nrows();
    let mut reg = cov.clone();
    for i in 0..p {
        reg[[i, i]] += ridge;
    }
    let eig = numerics::sym_eig(&SymMatrix::symmetrized(reg)?)?;
    if eig.values[0] <= 0.0 {
        return Err(Error::SingularCovariance);
    }
    let inv_sqrt = eig.values.mapv(|v| 1.0 / v.sqrt());
    let mut scaled = eig.vectors.clone();
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        col *= inv_sqrt[j];
    }
    Ok(scaled.dot(&eig.vectors.t()))
}

/// Row indices grouped into `n_slices` contiguous quantile slices of `y`
/// (sizes differ by at most one).
fn quantile_slices(y: &Array1<f64>, n_slices: usize) -> Result<Vec<Vec<usize>>> {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| y[i].total_cmp(&y[j]));
    let base = n / n_slices;
    let extra = n % n_slices;
    let mut slices = Vec::with_capacity(n_slices);
    let mut at = 0usize;
    for s in 0..n_slices {
        let len = base + usize::from(s < extra);
        if len == 0 {
            return Err(Error::EmptySlice { slice: s });
        }
        slices.push(order[at..at + len].to_vec());
        at += len;
    }
    Ok(slices)
}

fn validate_inputs(x: &Array2<f64>, y: &Array1<f64>, d: usize, n_slices: usize) -> Result<()> {
    let (n, p) = x.dim();
    if y.len() != n {
        return Err(Error::SampleCountMismatch {
            left: n,
            right: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if n_slices < 2 {
        return Err(Error::InvalidParameter(
            "slice count must be at least 2".into(),
        ));
    }
    if d < 1 || d > p {
        return Err(Error::InvalidParameter(format!(
            "projection dimension must satisfy 1 <= d <= p (d={d}, p={p})"
        )));
    }
    Ok(())
}

/// Shared skeleton: whiten, build the method's kernel matrix from the
/// whitened slices, eigendecompose, back-transform the top-d eigenvectors.
fn sliced_fit<F>(
    x: &Array2<f64>,
    y: &Array1<f64>,
    d: usize,
    n_slices: usize,
    kernel: F,
) -> Result<Projection>
where
    F: Fn(&Array2<f64>, &[Vec<usize>]) -> Array2<f64>,
{
    validate_inputs(x, y, d, n_slices)?;
    let p = x.ncols();

    let cov = covariance(x);
    let ridge = 1e-8 * cov.diag().sum() / p as f64;
    let w = whitener(&cov, ridge)?;
    let mean = x.mean_axis(Axis(0)).expect("non-empty input");
    let xw = (x - &mean.view().insert_axis(Axis(0))).dot(&w);

    let slices = quantile_slices(y, n_slices)?;
    let m = kernel(&xw, &slices);

    let eig = numerics::sym_eig(&SymMatrix::symmetrized(m)?)?;
    // Ascending spectrum: the informative directions sit at the top.
    let mut b = Array2::zeros((p, d));
    for k in 0..d {
        let src = eig.vectors.column(p - 1 - k);
        b.column_mut(k).assign(&src);
    }
    let b = w.dot(&b);
    let eigenvalues = Array1::from_iter(eig.values.iter().rev().cloned());
    Ok(Projection {
        b,
        slice_count: n_slices,
        eigenvalues,
    })
}

/// Sliced inverse regression: directions spanned by the slice means of the
/// whitened predictors, back-transformed to the original coordinates.
pub fn sir(x: &Array2<f64>, y: &Array1<f64>, d: usize, n_slices: usize) -> Result<Projection> {
    sliced_fit(x, y, d, n_slices, |xw, slices| {
        let (n, p) = xw.dim();
        let mut m = Array2::zeros((p, p));
        for idx in slices {
            let p_s = idx.len() as f64 / n as f64;
            let mut mean = Array1::<f64>::zeros(p);
            for &i in idx {
                mean += &xw.row(i);
            }
            mean /= idx.len() as f64;
            for a in 0..p {
                for b in 0..p {
                    m[[a, b]] += p_s * mean[a] * mean[b];
                }
            }
        }
        m
    })
}

/// Sliced average variance estimation: directions from the deviation of the
/// slice covariances from identity, `sum_s p_s (I - V_s)^2` on whitened
/// predictors. Picks up symmetric structure that slice means miss.
pub fn save(x: &Array2<f64>, y: &Array1<f64>, d: usize, n_slices: usize) -> Result<Projection> {
    sliced_fit(x, y, d, n_slices, |xw, slices| {
        let (n, p) = xw.dim();
        let mut m = Array2::zeros((p, p));
        for idx in slices {
            let p_s = idx.len() as f64 / n as f64;
            let rows = xw.select(Axis(0), idx);
            let v = covariance(&rows);
            let mut a = -v;
            for i in 0..p {
                a[[i, i]] += 1.0;
            }
            m = m + p_s * a.dot(&a);
        }
        m
    })
}

/// Applies a fitted projection: `Z = X B`.
pub fn project(x: &Array2<f64>, proj: &Projection) -> Result<DataMatrix> {
    if x.ncols() != proj.b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: proj.b.nrows(),
            got: x.ncols(),
            context: "projection input columns",
        });
    }
    DataMatrix::new(x.dot(&proj.b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_matrix(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal))
    }

    fn cosine(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn whitening_yields_identity_covariance() {
        let x = gaussian_matrix(200, 4, 1);
        let cov = covariance(&x);
        let w = whitener(&cov, 1e-10 * cov.diag().sum() / 4.0).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        let xw = (&x - &mean.view().insert_axis(Axis(0))).dot(&w);
        let cw = covariance(&xw);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((cw[[i, j]] - want).abs() < 1e-8, "cov[{i},{j}] = {}", cw[[i, j]]);
            }
        }
    }

    #[test]
    fn sir_recovers_single_index_direction() {
        let n = 500;
        let p = 5;
        let x = gaussian_matrix(n, p, 2);
        let beta = Array1::from_vec(vec![1.0, -2.0, 0.5, 0.0, 1.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = Array1::from_shape_fn(n, |i| {
            let s: f64 = (0..p).map(|j| beta[j] * x[[i, j]]).sum();
            s + 0.01 * rng.sample::<f64, _>(StandardNormal)
        });
        let proj = sir(&x, &y, 2, DEFAULT_SLICES).unwrap();
        let lead = proj.b.column(0).to_owned();
        let c = cosine(&lead, &beta).abs();
        assert!(c >= 0.95, "|cos| = {c}");
    }

    #[test]
    fn save_recovers_symmetric_quadratic_direction() {
        let n = 1000;
        let p = 5;
        let x = gaussian_matrix(n, p, 4);
        let beta = Array1::from_vec(vec![0.8, 0.0, -1.2, 0.4, 0.0]);
        let y = Array1::from_shape_fn(n, |i| {
            let s: f64 = (0..p).map(|j| beta[j] * x[[i, j]]).sum();
            s * s
        });
        let proj = save(&x, &y, 2, DEFAULT_SLICES).unwrap();
        let lead = proj.b.column(0).to_owned();
        let c = cosine(&lead, &beta).abs();
        assert!(c >= 0.9, "|cos| = {c}");
    }

    // An independent response should produce no dominant direction compared
    // to a strong single-index signal on the same predictors.
    #[test]
    fn independent_response_has_no_dominant_direction() {
        let n = 500;
        let x = gaussian_matrix(n, 5, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y_noise = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
        let y_signal = Array1::from_shape_fn(n, |i| x[[i, 0]] * 3.0);

        let null = sir(&x, &y_noise, 1, DEFAULT_SLICES).unwrap();
        let signal = sir(&x, &y_signal, 1, DEFAULT_SLICES).unwrap();
        assert!(
            null.eigenvalues[0] < signal.eigenvalues[0] / 3.0,
            "null leading eigenvalue {} vs signal {}",
            null.eigenvalues[0],
            signal.eigenvalues[0]
        );
    }

    // Rotating the predictors rotates the recovered subspace accordingly:
    // the projectors satisfy P_rot = R^T P R.
    #[test]
    fn sir_is_rotation_equivariant() {
        let n = 400;
        let p = 4;
        let x = gaussian_matrix(n, p, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y = Array1::from_shape_fn(n, |i| {
            2.0 * x[[i, 0]] - x[[i, 2]] + 0.05 * rng.sample::<f64, _>(StandardNormal)
        });

        // Givens rotation in coordinates (0, 1).
        let theta = 0.53f64;
        let mut r = Array2::eye(p);
        r[[0, 0]] = theta.cos();
        r[[0, 1]] = -theta.sin();
        r[[1, 0]] = theta.sin();
        r[[1, 1]] = theta.cos();

        let d = 2;
        let pa = projector(&sir(&x, &y, d, DEFAULT_SLICES).unwrap().b);
        let xr = x.dot(&r);
        let pb = projector(&sir(&xr, &y, d, DEFAULT_SLICES).unwrap().b);
        let want = r.t().dot(&pa).dot(&r);
        for (a, b) in pb.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-6, "projectors differ: {a} vs {b}");
        }
    }

    fn projector(b: &Array2<f64>) -> Array2<f64> {
        let gram = b.t().dot(b);
        let sol = numerics::chol_solve_multi(&gram, &b.t().to_owned()).unwrap();
        b.dot(&sol)
    }

    #[test]
    fn full_dimension_projection_spans_everything() {
        let x = gaussian_matrix(100, 3, 9);
        let y = Array1::from_shape_fn(100, |i| x[[i, 1]]);
        let proj = sir(&x, &y, 3, 5).unwrap();
        assert_eq!(proj.b.dim(), (3, 3));
        let gram = SymMatrix::symmetrized(proj.b.t().dot(&proj.b)).unwrap();
        let eig = numerics::sym_eig(&gram).unwrap();
        assert!(eig.values[0] > 1e-12, "projection lost rank");
    }

    #[test]
    fn projection_with_identity_selects_coordinates() {
        let x = gaussian_matrix(10, 3, 10);
        let mut b = Array2::zeros((3, 2));
        b[[0, 0]] = 1.0;
        b[[2, 1]] = 1.0;
        let proj = Projection {
            b,
            slice_count: 2,
            eigenvalues: Array1::zeros(3),
        };
        let z = project(&x, &proj).unwrap();
        for i in 0..10 {
            assert_eq!(z.as_array()[[i, 0]], x[[i, 0]]);
            assert_eq!(z.as_array()[[i, 1]], x[[i, 2]]);
        }

        let bad = project(&gaussian_matrix(5, 2, 11), &proj);
        assert!(matches!(bad, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn fits_are_deterministic() {
        let x = gaussian_matrix(120, 4, 12);
        let y = Array1::from_shape_fn(120, |i| x[[i, 0]] - x[[i, 3]]);
        let a = sir(&x, &y, 2, DEFAULT_SLICES).unwrap();
        let b = sir(&x, &y, 2, DEFAULT_SLICES).unwrap();
        assert_eq!(a.b, b.b);
        let a = save(&x, &y, 2, DEFAULT_SLICES).unwrap();
        let b = save(&x, &y, 2, DEFAULT_SLICES).unwrap();
        assert_eq!(a.b, b.b);
    }

    #[test]
    fn degenerate_inputs_error_cleanly() {
        let x = gaussian_matrix(5, 3, 13);
        let y = Array1::from_shape_fn(5, |i| i as f64);
        assert!(matches!(
            sir(&x, &y, 2, 10),
            Err(Error::EmptySlice { .. })
        ));
        assert!(sir(&x, &y, 4, 2).is_err()); // d > p
        assert!(sir(&x, &y, 2, 1).is_err()); // too few slices
        let constant = Array2::zeros((5, 3));
        assert!(matches!(
            sir(&constant, &y, 2, 2),
            Err(Error::SingularCovariance)
        ));
    }
}
