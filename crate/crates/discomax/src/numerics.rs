//! Dense symmetric linear algebra: eigendecomposition, generalized
//! eigenvalue extremes for a PSD/PD pencil, and an eigenvalue-thresholded
//! pseudo-inverse.
//!
//! ndarray is the data plane everywhere in this crate; nalgebra is used here
//! (and only here) for its pure-Rust symmetric QL solver and Cholesky.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Square symmetric matrix with validated entries.
///
/// Construction checks squareness, finiteness, and symmetry (up to a small
/// relative tolerance), so downstream code can rely on all three.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    entries: Array2<f64>,
}

impl SymMatrix {
    /// Wraps a matrix after validating it is square, finite and symmetric
    /// to within `1e-10` relative to its largest entry.
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::NonSquare { rows: r, cols: c });
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "symmetric matrix entries",
            });
        }
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for i in 0..r {
            for j in (i + 1)..r {
                if (entries[[i, j]] - entries[[j, i]]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Averages `a` with its transpose and wraps the result. Useful for
    /// matrices that are symmetric in exact arithmetic but carry rounding
    /// noise from their construction.
    pub fn symmetrized(a: Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::NonSquare { rows: r, cols: c });
        }
        let sym = 0.5 * (&a + &a.t());
        Self::new(sym)
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_array(self) -> Array2<f64> {
        self.entries
    }
}

/// Eigendecomposition of a symmetric matrix: `values` ascending, `vectors`
/// holding the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_row_iterator(a.nrows(), a.ncols(), a.iter().cloned())
}

fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Full eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eig(a: &SymMatrix) -> Result<EigenPair> {
    let n = a.order();
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    let dm = to_dmatrix(a.as_array());
    // QL with implicit shifts converges in a handful of sweeps per
    // eigenvalue; the cap exists so a pathological input errors instead of
    // spinning.
    let eig = dm
        .try_symmetric_eigen(f64::EPSILON, 200 * n + 2000)
        .ok_or(Error::NonConvergence)?;
    if !eig.eigenvalues.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            context: "eigenvalues",
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors =
        Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, order[j])]);
    Ok(EigenPair { values, vectors })
}

/// All generalized eigenvalues of the pencil `(A, B)` with `B` symmetric
/// positive definite, ascending. Solved by Cholesky-whitening `B` and
/// eigendecomposing `L^-1 A L^-T`.
pub fn gen_eig_values(a: &SymMatrix, b: &SymMatrix) -> Result<Array1<f64>> {
    if a.order() != b.order() {
        return Err(Error::DimensionMismatch {
            expected: a.order(),
            got: b.order(),
            context: "pencil matrices must share an order",
        });
    }
    let chol = to_dmatrix(b.as_array())
        .cholesky()
        .ok_or(Error::NotPositiveDefinite {
            context: "pencil right-hand matrix",
        })?;
    let l = chol.l();
    // C = L^-1 A L^-T, computed with two triangular solves.
    let t1 = l
        .solve_lower_triangular(&to_dmatrix(a.as_array()))
        .ok_or(Error::SingularSystem {
            context: "triangular whitening solve",
        })?;
    let t2 = l
        .solve_lower_triangular(&t1.transpose())
        .ok_or(Error::SingularSystem {
            context: "triangular whitening solve",
        })?;
    let c = SymMatrix::symmetrized(from_dmatrix(&t2))?;
    Ok(sym_eig(&c)?.values)
}

/// Smallest and largest generalized eigenvalues of the pencil `(A, B)`,
/// `B` symmetric positive definite.
pub fn gen_eig_extremes(a: &SymMatrix, b: &SymMatrix) -> Result<(f64, f64)> {
    let values = gen_eig_values(a, b)?;
    let min = values[0];
    let max = values[values.len() - 1];
    Ok((min, max))
}

/// Relative eigenvalue cutoff used by [`pinv_psd`] when callers have no
/// better notion of rank: `order * machine epsilon`.
pub fn default_rank_tol(order: usize) -> f64 {
    order as f64 * f64::EPSILON
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix via its
/// eigendecomposition: eigenvalues above `rank_tol * lambda_max` are
/// inverted, the rest (including any slightly negative rounding noise) are
/// zeroed.
pub fn pinv_psd(a: &SymMatrix, rank_tol: f64) -> Result<SymMatrix> {
    let eig = sym_eig(a)?;
    let lambda_max = eig.values.iter().fold(0.0f64, |m, &v| m.max(v));
    let cut = rank_tol * lambda_max;
    let inv = eig.values.mapv(|v| if v > cut { 1.0 / v } else { 0.0 });

    let n = a.order();
    let mut scaled = eig.vectors.clone();
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        col *= inv[j];
    }
    let mut out = scaled.dot(&eig.vectors.t());
    // Symmetrize away rounding noise from the two matrix products.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (out[[i, j]] + out[[j, i]]);
            out[[i, j]] = m;
            out[[j, i]] = m;
        }
    }
    SymMatrix::new(out)
}

/// Solves `A X = RHS` for symmetric positive definite `A` (one column of X
/// per column of RHS) via a single Cholesky factorization. `A` is trusted to
/// be symmetric; definiteness is detected by the factorization itself.
pub fn chol_solve_multi(a: &Array2<f64>, rhs: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::NonSquare {
            rows: n,
            cols: a.ncols(),
        });
    }
    if rhs.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.nrows(),
            context: "right-hand side rows vs system order",
        });
    }
    let chol = to_dmatrix(a).cholesky().ok_or(Error::SingularSystem {
        context: "Cholesky factorization failed (matrix not positive definite)",
    })?;
    let sol = chol.solve(&to_dmatrix(rhs));
    if !sol.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            context: "linear solve produced non-finite values",
        });
    }
    Ok(from_dmatrix(&sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        SymMatrix::symmetrized(raw).unwrap()
    }

    #[test]
    fn sym_eig_diagonal_sorts_ascending() {
        let a = SymMatrix::new(Array2::from_diag(&array![3.0, 1.0, 2.0])).unwrap();
        let eig = sym_eig(&a).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-12);
        assert!((eig.values[1] - 2.0).abs() < 1e-12);
        assert!((eig.values[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sym_eig_identity_is_all_ones() {
        let a = SymMatrix::new(Array2::eye(4)).unwrap();
        let eig = sym_eig(&a).unwrap();
        for v in eig.values.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    // Reconstruction oracle: V diag(w) V^T must reproduce A, and V must be
    // orthonormal.
    #[test]
    fn sym_eig_reconstructs_random_matrices() {
        for seed in 0..5u64 {
            let n = 8;
            let a = random_symmetric(n, seed);
            let eig = sym_eig(&a).unwrap();

            let mut scaled = eig.vectors.clone();
            for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
                col *= eig.values[j];
            }
            let recon = scaled.dot(&eig.vectors.t());
            let scale = a.as_array().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in recon.iter().zip(a.as_array().iter()) {
                assert!((x - y).abs() <= 1e-9 * scale.max(1.0), "reconstruction off");
            }

            let gram = eig.vectors.t().dot(&eig.vectors);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[[i, j]] - want).abs() < 1e-9, "vectors not orthonormal");
                }
            }
        }
    }

    #[test]
    fn gen_eig_identity_pencil_is_plain_eig() {
        let a = SymMatrix::new(Array2::from_diag(&array![2.0, 8.0])).unwrap();
        let b = SymMatrix::new(Array2::eye(2)).unwrap();
        let (min, max) = gen_eig_extremes(&a, &b).unwrap();
        assert!((min - 2.0).abs() < 1e-12);
        assert!((max - 8.0).abs() < 1e-12);
    }

    #[test]
    fn gen_eig_diagonal_pencil_takes_ratios() {
        let a = SymMatrix::new(Array2::eye(2)).unwrap();
        let b = SymMatrix::new(Array2::from_diag(&array![2.0, 4.0])).unwrap();
        let (min, max) = gen_eig_extremes(&a, &b).unwrap();
        assert!((min - 0.25).abs() < 1e-12);
        assert!((max - 0.5).abs() < 1e-12);
    }

    // Constructed oracle: with B = L L^T and A = L diag(mu) L^T the pencil
    // eigenvalues are exactly mu, whatever L is.
    #[test]
    fn gen_eig_recovers_planted_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 6;
        let mut l = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                l[[i, j]] = rng.random_range(-1.0..1.0);
            }
            l[[i, i]] += 2.0; // keep it well conditioned
        }
        let mu = array![-0.7, -0.1, 0.3, 0.9, 1.4, 2.2];
        let b = SymMatrix::symmetrized(l.dot(&l.t())).unwrap();
        let mut lm = l.clone();
        for (j, mut col) in lm.columns_mut().into_iter().enumerate() {
            col *= mu[j];
        }
        let a = SymMatrix::symmetrized(lm.dot(&l.t())).unwrap();

        let values = gen_eig_values(&a, &b).unwrap();
        for (got, want) in values.iter().zip(mu.iter()) {
            assert!((got - want).abs() < 1e-8, "got {got}, want {want}");
        }
    }

    #[test]
    fn gen_eig_rejects_indefinite_rhs() {
        let a = SymMatrix::new(Array2::eye(2)).unwrap();
        let b = SymMatrix::new(Array2::from_diag(&array![1.0, -1.0])).unwrap();
        assert!(matches!(
            gen_eig_extremes(&a, &b),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn sym_matrix_rejects_non_finite_and_asymmetric() {
        let nan = Array2::from_shape_fn((2, 2), |_| f64::NAN);
        assert!(matches!(SymMatrix::new(nan), Err(Error::NonFinite { .. })));

        let asym = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(SymMatrix::new(asym).is_err());
    }

    #[test]
    fn pinv_of_singular_diagonal() {
        let a = SymMatrix::new(Array2::from_diag(&array![2.0, 0.0])).unwrap();
        let p = pinv_psd(&a, 1e-12).unwrap();
        assert!((p.as_array()[[0, 0]] - 0.5).abs() < 1e-14);
        assert!(p.as_array()[[1, 1]].abs() < 1e-14);
    }

    // Penrose oracle on a rank-deficient PSD matrix: the four defining
    // identities of the Moore-Penrose inverse.
    #[test]
    fn pinv_satisfies_penrose_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 7;
        let r = 3;
        let g = Array2::from_shape_fn((n, r), |_| rng.random_range(-1.0..1.0));
        let a = SymMatrix::symmetrized(g.dot(&g.t())).unwrap();
        let x = pinv_psd(&a, default_rank_tol(n)).unwrap();

        let am = a.as_array();
        let xm = x.as_array();
        let axa = am.dot(xm).dot(am);
        let xax = xm.dot(am).dot(xm);
        let ax = am.dot(xm);
        let xa = xm.dot(am);
        let scale = am.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (p, q) in axa.iter().zip(am.iter()) {
            assert!((p - q).abs() < 1e-8 * scale.max(1.0));
        }
        for (p, q) in xax.iter().zip(xm.iter()) {
            assert!((p - q).abs() < 1e-8);
        }
        for i in 0..n {
            for j in 0..n {
                assert!((ax[[i, j]] - ax[[j, i]]).abs() < 1e-8);
                assert!((xa[[i, j]] - xa[[j, i]]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn chol_solve_recovers_planted_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 6;
        let g = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        let mut a = g.dot(&g.t());
        for i in 0..n {
            a[[i, i]] += 2.0;
        }
        let want = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let rhs = a.dot(&want);
        let got = chol_solve_multi(&a, &rhs).unwrap();
        for (x, y) in got.iter().zip(want.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn chol_solve_rejects_indefinite() {
        let a = array![[1.0, 0.0], [0.0, -1.0]];
        let rhs = Array2::from_elem((2, 1), 1.0);
        assert!(matches!(
            chol_solve_multi(&a, &rhs),
            Err(Error::SingularSystem { .. })
        ));
    }

    proptest! {
        // Eigenvalues come back sorted for arbitrary symmetric matrices.
        #[test]
        fn eigenvalues_ascend(seed in 0u64..500, n in 1usize..10) {
            let a = random_symmetric(n, seed);
            let eig = sym_eig(&a).unwrap();
            for w in eig.values.windows(2) {
                prop_assert!(w[0] <= w[1] + 1e-12);
            }
        }

        // pinv output is symmetric and PSD-signed on its spectrum.
        #[test]
        fn pinv_is_symmetric_psd(seed in 0u64..200, n in 1usize..8, r in 1usize..8) {
            let r = r.min(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = Array2::from_shape_fn((n, r), |_| rng.random_range(-1.0..1.0));
            let a = SymMatrix::symmetrized(g.dot(&g.t())).unwrap();
            let p = pinv_psd(&a, default_rank_tol(n)).unwrap();
            let eig = sym_eig(&p).unwrap();
            prop_assert!(eig.values[0] >= -1e-9);
        }
    }
}
