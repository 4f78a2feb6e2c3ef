//! The DisCoMax solver.
//!
//! Objective: over embeddings `Z` (n x d), maximize
//!
//! ```text
//! f(Z) = Tr(Z^T S Z) / sqrt(Tr(Z^T L_Z Z)),
//! S    = k_X * L_X + k_Y * L_y,
//! k_X  = 1 / sqrt(Tr(X^T L_X X)),   k_Y = 1 / sqrt(Tr(y^T L_y y)),
//! ```
//!
//! which equals `dcorr2(X, Z) + dcorr2(Z, y)` and is invariant to scaling
//! and translation of `Z`.
//!
//! The maximization is a generalized minorize-maximize loop. At the current
//! iterate `M = Z_k` the surrogate `g(Z, M) = Tr(Z^T S Z) / Tr(Z^T L_M Z)`
//! is improved by solving a fractional program: a golden-section search over
//! a Dinkelbach-style multiplier `alpha` in `[0, alpha_upper]`, where each
//! probe minimizes `H(Z; alpha) = Tr(Z^T L_M Z) - alpha * Tr(Z^T S Z)` with
//! the fixed-point iteration `Z <- H Z`,
//! `H = pinv(gamma^2 D_X - alpha S) (gamma^2 D_X - L_M)`.
//! The accepted step must keep the majorization chain valid (surrogate
//! ascent, trace contraction, objective >= surrogate), which makes the
//! recorded `f` sequence non-decreasing by construction; the iterate is then
//! rescaled so its self-distance trace is exactly `rescale_margin`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dcor::{
    center_columns, dcov2_via_laplacian, laplacian_from_data, DataMatrix, Laplacian,
};
use crate::error::{Error, Result};
use crate::numerics::{self, SymMatrix};

/// Precomputed Laplacians and normalization constants for a dataset.
#[derive(Debug, Clone)]
pub struct LaplacianBundle {
    l_x: Laplacian,
    l_y: Laplacian,
    d_x: Array1<f64>,
    s_xy: SymMatrix,
    k_x: f64,
    k_y: f64,
    n: usize,
    /// Cached self distance covariances of X and y, for correlation reports.
    vxx: f64,
    vyy: f64,
    /// Leading plain eigendirections of L_y then L_X (unit length, zero
    /// mean), strongest first; numerator-aligned search candidates.
    data_dirs: Vec<Array1<f64>>,
}

impl LaplacianBundle {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l_x(&self) -> &Laplacian {
        &self.l_x
    }

    pub fn l_y(&self) -> &Laplacian {
        &self.l_y
    }

    /// Diagonal of `L_X`.
    pub fn d_x(&self) -> &Array1<f64> {
        &self.d_x
    }

    pub fn s_xy(&self) -> &SymMatrix {
        &self.s_xy
    }

    pub fn k_x(&self) -> f64 {
        self.k_x
    }

    pub fn k_y(&self) -> f64 {
        self.k_y
    }

    /// `D_X` ridge-regularized the way the solver uses it: a relative ridge
    /// of `ridge_eps * trace(D_X) / n` added to every entry.
    pub fn d_x_ridged(&self, ridge_eps: f64) -> Array1<f64> {
        let ridge = ridge_eps * self.d_x.sum() / self.n as f64;
        self.d_x.mapv(|v| v + ridge)
    }
}

/// Which generalized eigenvalue of the pencil `(L_M, S)` bounds the
/// golden-section bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaBound {
    /// Smallest eigenvalue on the pencil's non-null space. This is the bound
    /// under which the surrogate subproblem keeps its descent guarantees, and
    /// the default.
    LambdaMin,
    /// Largest pencil eigenvalue; opt-in for experimentation.
    LambdaMax,
}

/// Solver knobs. `Default` gives the recommended settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Embedding dimension d (2 <= d < n).
    pub dim: usize,
    /// Outer minorize-maximize iteration cap.
    pub max_outer: usize,
    /// Outer stop: relative squared change of Z between iterations.
    pub outer_tol: f64,
    /// Fixed-point iteration cap per subproblem solve.
    pub t_max: usize,
    /// Fixed-point stop: absolute change of H between iterations.
    pub inner_tol: f64,
    /// Golden-section stop, relative to the initial bracket width.
    pub alpha_tol: f64,
    /// Multiplier (> 1) on the largest Rayleigh quotient of (L_M, D_X)
    /// defining gamma^2.
    pub gamma_margin: f64,
    /// Relative ridge added to the degree diagonal D_X before the
    /// fixed-point pencils are formed.
    pub ridge_eps: f64,
    /// Self-distance trace every accepted iterate is rescaled to. The ascent
    /// argument needs the trace pinned at exactly 1, so leave this at 1.0
    /// unless experimenting.
    pub rescale_margin: f64,
    /// Bracket top for the golden-section search.
    pub alpha_bound: AlphaBound,
    /// Record per-iteration H values of accepted subproblem solves.
    pub verbose_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            max_outer: 50,
            outer_tol: 1e-6,
            t_max: 220,
            inner_tol: 1e-8,
            alpha_tol: 1e-4,
            gamma_margin: 1.01,
            ridge_eps: 1e-10,
            rescale_margin: 1.0,
            alpha_bound: AlphaBound::LambdaMin,
            verbose_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn with_dim(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.dim < 2 || self.dim >= n {
            return Err(Error::BadDimension { dim: self.dim, n });
        }
        if self.max_outer == 0 || self.t_max == 0 {
            return Err(Error::InvalidParameter(
                "iteration caps must be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("outer_tol", self.outer_tol),
            ("inner_tol", self.inner_tol),
            ("alpha_tol", self.alpha_tol),
            ("ridge_eps", self.ridge_eps),
            ("rescale_margin", self.rescale_margin),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite"
                )));
            }
        }
        if !(self.gamma_margin >= 1.0 && self.gamma_margin.is_finite()) {
            return Err(Error::InvalidParameter(
                "gamma_margin must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// One outer-iteration line of the convergence trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    pub f: f64,
    pub dcorr2_xz: f64,
    pub dcorr2_zy: f64,
    pub alpha_star: f64,
    pub kappa: f64,
    pub inner_iters: usize,
}

/// Convergence trace of a solver run: one record per outer iterate
/// (including the initializer at k = 0), plus optional inner H sequences.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GmmTrace {
    pub records: Vec<OuterRecord>,
    /// Per accepted outer step, the H values of the chosen subproblem solve.
    /// Empty unless `verbose_trace` was set.
    pub inner_h: Vec<Vec<f64>>,
}

impl GmmTrace {
    /// Tab-separated rendering with a header, one row per outer record.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("k\tf\tdcorr2_XZ\tdcorr2_Zy\talpha_star\tkappa\tinner_iters\n");
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.k, r.f, r.dcorr2_xz, r.dcorr2_zy, r.alpha_star, r.kappa, r.inner_iters
            ));
        }
        out
    }
}

/// Result of a full DisCoMax run.
#[derive(Debug, Clone)]
pub struct DiscomaxFit {
    /// Final embedding, column-centered, self-distance trace pinned to the
    /// rescale margin.
    pub z: Array2<f64>,
    pub trace: GmmTrace,
    /// Objective at the final iterate.
    pub f_final: f64,
    /// With `verbose_trace`: accepted iterates Z_0, Z_1, ... (post-rescale).
    pub iterates: Vec<Array2<f64>>,
    /// With `verbose_trace`: the accepted candidates before rescaling,
    /// aligned with `iterates[1..]`.
    pub iterates_pre: Vec<Array2<f64>>,
}

/// `sum(z .* (a z))`, i.e. `Tr(Z^T A Z)` for symmetric `A`.
fn quad_trace(a: &Array2<f64>, z: &Array2<f64>) -> f64 {
    let az = a.dot(z);
    z.iter().zip(az.iter()).map(|(p, q)| p * q).sum()
}

/// `Tr(Z^T L_Z Z) = 2 ||Zc^T Zc||_F^2` via the centered Gram matrix.
fn self_trace(z: &Array2<f64>) -> f64 {
    let zc = center_columns(z);
    let gram = zc.t().dot(&zc);
    2.0 * gram.iter().map(|v| v * v).sum::<f64>()
}

/// Builds the Laplacians `L_X`, `L_y`, their normalized sum `S`, and the
/// normalization constants for a dataset. Errors with `DegenerateData` if
/// either variable is constant (zero self distance trace).
pub fn build_bundle(x: &DataMatrix, y: &DataMatrix) -> Result<LaplacianBundle> {
    if x.n() != y.n() {
        return Err(Error::SampleCountMismatch {
            left: x.n(),
            right: y.n(),
        });
    }
    let n = x.n();
    let l_x = laplacian_from_data(x)?;
    let l_y = laplacian_from_data(y)?;

    let n2 = (n * n) as f64;
    let vxx = dcov2_via_laplacian(x, &l_x)?;
    let vyy = dcov2_via_laplacian(y, &l_y)?;
    let tx = vxx * n2 / 2.0; // Tr(X^T L_X X)
    let ty = vyy * n2 / 2.0;
    if tx <= 0.0 {
        return Err(Error::DegenerateData {
            context: "features have zero self distance trace (constant X?)",
        });
    }
    if ty <= 0.0 {
        return Err(Error::DegenerateData {
            context: "response has zero self distance trace (constant y?)",
        });
    }
    let k_x = 1.0 / tx.sqrt();
    let k_y = 1.0 / ty.sqrt();
    let s = l_x.as_array() * k_x + l_y.as_array() * k_y;
    let s_xy = SymMatrix::symmetrized(s)?;
    let d_x = l_x.diag();

    let mut data_dirs = leading_directions(y, 2);
    data_dirs.extend(leading_directions(x, 4));

    Ok(LaplacianBundle {
        l_x,
        l_y,
        d_x,
        s_xy,
        k_x,
        k_y,
        n,
        vxx,
        vyy,
        data_dirs,
    })
}

/// Unit-norm leading principal directions of column-centered data — the
/// plain eigenvectors of its distance Laplacian `2 Xc Xc^T` — strongest
/// first, at most `cap` of them. Extracted through the small-side Gram
/// `Xc^T Xc`, so the cost is O(n p^2) rather than an n x n decomposition.
fn leading_directions(data: &DataMatrix, cap: usize) -> Vec<Array1<f64>> {
    let xc = center_columns(data.as_array());
    let gram = xc.t().dot(&xc);
    let Ok(sym) = SymMatrix::symmetrized(gram) else {
        return Vec::new();
    };
    let Ok(eig) = numerics::sym_eig(&sym) else {
        return Vec::new();
    };
    let top = eig.values.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut out = Vec::new();
    if top <= 0.0 {
        return out;
    }
    let p = eig.values.len();
    for idx in (0..p).rev().take(cap) {
        let lam = eig.values[idx];
        if lam <= 1e-12 * top {
            break;
        }
        out.push(xc.dot(&eig.vectors.column(idx)) / lam.sqrt());
    }
    out
}

/// The DisCoMax objective `f(Z) = Tr(Z^T S Z) / sqrt(Tr(Z^T L_Z Z))`.
/// Translation-invariant, so `Z` need not be centered.
pub fn objective_f(z: &Array2<f64>, bundle: &LaplacianBundle) -> Result<f64> {
    if z.nrows() != bundle.n {
        return Err(Error::DimensionMismatch {
            expected: bundle.n,
            got: z.nrows(),
            context: "embedding rows vs bundle",
        });
    }
    let t = self_trace(z);
    if t <= 0.0 {
        return Err(Error::DegenerateZ);
    }
    Ok(quad_trace(bundle.s_xy.as_array(), &center_columns(z)) / t.sqrt())
}

/// The surrogate `g(Z, M) = Tr(Z^T S Z) / Tr(Z^T L_M Z)` anchored at `M`.
pub fn surrogate_g(z: &Array2<f64>, m: &Array2<f64>, bundle: &LaplacianBundle) -> Result<f64> {
    if z.nrows() != bundle.n || m.nrows() != bundle.n {
        return Err(Error::DimensionMismatch {
            expected: bundle.n,
            got: z.nrows().max(m.nrows()),
            context: "surrogate arguments vs bundle",
        });
    }
    let l_m = laplacian_from_data(&DataMatrix::new(m.clone())?)?;
    let zc = center_columns(z);
    let denom = quad_trace(l_m.as_array(), &zc);
    if denom <= 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(quad_trace(bundle.s_xy.as_array(), &zc) / denom)
}

/// Deterministic initializer: `Z_0 = [c J_d; 0]` with
/// `c = (2 (d - 1))^(-1/4)` and `J_d` the d x d centering matrix, so that
/// `Tr(Z_0^T L_{Z_0} Z_0) = 1` exactly.
pub fn init_z0(n: usize, d: usize) -> Result<Array2<f64>> {
    if d < 2 || d >= n {
        return Err(Error::BadDimension { dim: d, n });
    }
    let c = (2.0 * (d as f64 - 1.0)).powf(-0.25);
    let mut z = Array2::<f64>::zeros((n, d));
    for i in 0..d {
        for j in 0..d {
            z[[i, j]] = c * ((if i == j { 1.0 } else { 0.0 }) - 1.0 / d as f64);
        }
    }
    Ok(z)
}

/// `gamma^2 = gamma_margin * lambda_max(L_M, D_X)` with `D_X` ridged; the
/// smallest curvature multiplier that keeps `gamma^2 D_X - L_M` PSD, with
/// margin.
pub fn gamma_squared(
    l_m: &Laplacian,
    bundle: &LaplacianBundle,
    config: &SolverConfig,
) -> Result<f64> {
    let n = bundle.n;
    if l_m.order() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: l_m.order(),
            context: "L_M order vs bundle",
        });
    }
    let d_reg = bundle.d_x_ridged(config.ridge_eps);
    if d_reg.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::DegeneratePencil {
            context: "ridged D_X has a non-positive entry",
        });
    }
    // Whiten by the diagonal: lambda_max of D^-1/2 L_M D^-1/2.
    let inv_sqrt = d_reg.mapv(|v| 1.0 / v.sqrt());
    let lm = l_m.as_array();
    let w = Array2::from_shape_fn((n, n), |(i, j)| lm[[i, j]] * inv_sqrt[i] * inv_sqrt[j]);
    let eig = numerics::sym_eig(&SymMatrix::symmetrized(w)?)?;
    let lambda_max = eig.values[n - 1].max(0.0);
    Ok(config.gamma_margin * lambda_max)
}

/// The pencil `(L_M, S)` reduced to the range of `S`: the projected
/// spectrum (of `W^T L_M W` with `W^T S W = I`) and the Schur-compressed
/// spectrum (coupling through null(S) eliminated, the exact global PSD
/// threshold). `None` when `S` is numerically zero.
fn pencil_spectra(
    l_m: &Laplacian,
    bundle: &LaplacianBundle,
) -> Result<Option<(Array1<f64>, Array1<f64>)>> {
    let n = bundle.n;
    if l_m.order() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: l_m.order(),
            context: "L_M order vs bundle",
        });
    }
    let eig = numerics::sym_eig(&bundle.s_xy)?;
    let sigma_max = eig.values[n - 1].max(0.0);
    if sigma_max <= 0.0 {
        return Ok(None);
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| eig.values[i] > 1e-10 * sigma_max)
        .collect();
    let r = keep.len();
    let mut w = Array2::<f64>::zeros((n, r));
    for (c, &i) in keep.iter().enumerate() {
        let scale = 1.0 / eig.values[i].sqrt();
        for row in 0..n {
            w[[row, c]] = eig.vectors[[row, i]] * scale;
        }
    }
    let lw = l_m.as_array().dot(&w);
    let a = w.t().dot(&lw);
    let projected = numerics::sym_eig(&SymMatrix::symmetrized(a.clone())?)?.values;

    // Null(S) directions are free in `L_M - alpha S >= 0`, but they couple
    // to range(S) through L_M's off-diagonal block. Minimizing the
    // quadratic over the free directions leaves the Schur complement
    // `A - B^T C^+ B` as the binding operator on range(S).
    let compressed = if r < n {
        let mut u0 = Array2::<f64>::zeros((n, n - r));
        for (c, i) in (0..n).filter(|i| !keep.contains(i)).enumerate() {
            u0.column_mut(c).assign(&eig.vectors.column(i));
        }
        let b0 = u0.t().dot(&lw);
        let c0 = u0.t().dot(&l_m.as_array().dot(&u0));
        let c0_pinv = numerics::pinv_psd(&SymMatrix::symmetrized(c0)?, 1e-10)?;
        let c_hat = &a - &b0.t().dot(&c0_pinv.as_array().dot(&b0));
        numerics::sym_eig(&SymMatrix::symmetrized(c_hat)?)?.values
    } else {
        projected.clone()
    };
    Ok(Some((projected, compressed)))
}

/// Upper end of the golden-section bracket: an extreme generalized
/// eigenvalue of the pencil `(L_M, S)` projected onto the range of `S`.
///
/// The projection is what makes the bound well defined: both matrices kill
/// the all-ones vector, and `L_M` built from an `n x d` iterate has a large
/// null space, so the unrestricted pencil is singular. Directions with
/// `v^T S v = 0` never enter the ratio `v^T L_M v / v^T S v`, hence the
/// pencil lives on `range(S)`: with `S = U diag(sigma) U^T` and
/// `W = U_+ sigma_+^{-1/2}` (so `W^T S W = I`), its eigenvalues are the
/// ordinary spectrum of `W^T L_M W`.
///
/// With [`AlphaBound::LambdaMin`] the bound is the smallest eigenvalue of
/// that spectrum above a noise gate (rank-gap zeros of `L_M` surface as
/// rounding-scale values and are treated as null); this keeps
/// `L_M - alpha S` PSD on the pencil's nonnull space, which is what the
/// surrogate-ascent argument consumes. It is *not* the global PSD
/// threshold — coupling through null(S) can push that lower (see
/// [`alpha_contractive`]); the outer loop therefore validates each accepted
/// step directly instead of leaning on a contraction guarantee.
/// [`AlphaBound::LambdaMax`] takes the largest eigenvalue instead, a
/// deliberately aggressive bracket.
pub fn alpha_upper(
    l_m: &Laplacian,
    bundle: &LaplacianBundle,
    config: &SolverConfig,
) -> Result<f64> {
    let Some((projected, _)) = pencil_spectra(l_m, bundle)? else {
        // S is numerically zero; no usable bracket.
        return Ok(0.0);
    };
    let r = projected.len();
    let lambda_max = projected[r - 1];
    if lambda_max <= 0.0 {
        // L_M is (numerically) zero on range(S); the bracket collapses.
        return Ok(0.0);
    }
    match config.alpha_bound {
        AlphaBound::LambdaMax => Ok(lambda_max),
        AlphaBound::LambdaMin => {
            let cut = 1e-9 * lambda_max;
            Ok(projected
                .iter()
                .copied()
                .filter(|&v| v > cut)
                .fold(lambda_max, f64::min))
        }
    }
}

/// The largest `alpha` at which `L_M - alpha S` is PSD on all of R^n, i.e.
/// the exact threshold below which the fixed-point operator
/// `H = (gamma^2 D - alpha S)^+ (gamma^2 D - L_M)` is provably
/// non-expansive (spectral radius at most 1).
///
/// Equals the smallest eigenvalue of the Schur complement of `L_M` on
/// `range(S)`: `W^T L_M W - (U_0^T L_M W)^T (U_0^T L_M U_0)^+ (U_0^T L_M W)`
/// with `U_0` spanning null(S). For an `L_M` of full rank off the ones
/// vector this is strictly positive; for a low-rank `L_M` (an `n x d`
/// iterate) the free null(S) directions can cancel all of its energy and
/// the threshold collapses to zero — the contraction guarantee is vacuous
/// there, which is why the solver's bracket uses [`alpha_upper`] and
/// validates steps explicitly.
pub fn alpha_contractive(l_m: &Laplacian, bundle: &LaplacianBundle) -> Result<f64> {
    let Some((_, compressed)) = pencil_spectra(l_m, bundle)? else {
        return Ok(0.0);
    };
    // The Schur complement is PSD in exact arithmetic; clamp rounding noise.
    Ok(compressed[0].max(0.0))
}

/// The fixed-point operator
/// `H = pinv(gamma^2 D_X - alpha S) * (gamma^2 D_X - L_M)`.
///
/// For `alpha` within the PSD range of the pencil (which
/// [`alpha_upper`] guarantees when `L_M` has no rank gap against `S`) the
/// spectral radius of `H` is at most 1 and the iteration `Z <- H Z`
/// monotonically decreases `H(Z; alpha)`.
pub fn fixed_point_matrix(
    gamma2: f64,
    alpha: f64,
    l_m: &Laplacian,
    bundle: &LaplacianBundle,
    config: &SolverConfig,
) -> Result<Array2<f64>> {
    let n = bundle.n;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(
            "alpha must be finite and non-negative".into(),
        ));
    }
    let d_reg = bundle.d_x_ridged(config.ridge_eps);
    let s = bundle.s_xy.as_array();
    let mut b = s * (-alpha);
    let mut p = l_m.as_array() * (-1.0);
    for i in 0..n {
        b[[i, i]] += gamma2 * d_reg[i];
        p[[i, i]] += gamma2 * d_reg[i];
    }
    let b_inv = numerics::pinv_psd(&SymMatrix::symmetrized(b)?, numerics::default_rank_tol(n))?;
    Ok(b_inv.as_array().dot(&p))
}

/// Output of one Problem-S solve (fixed-point minimization of
/// `H(Z; alpha)` at a fixed multiplier).
#[derive(Debug, Clone)]
pub struct ProblemSSolution {
    /// Final value of `H(Z; alpha)`.
    pub f_alpha: f64,
    /// Minimizing iterate (column-centered).
    pub z: Array2<f64>,
    /// Fixed-point iterations actually run.
    pub iters: usize,
    /// `H` value per iterate, starting at the warm start.
    pub h_values: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Inner machinery: one basis change per outer step makes every probe cheap.
//
// Diagonalizing the pencil (S, D_reg) once (V^T D V = I, V^T S V = diag(s))
// turns B = gamma^2 D - alpha S into a diagonal matrix in V-coordinates for
// every alpha, so a fixed-point step is a single matmul with
// Lambda = V^T L_M V instead of a pseudo-inverse per probe. This is the same
// iteration `Z <- H Z` expressed in another basis (tests pin the equality).
// ---------------------------------------------------------------------------

struct StepBasis {
    /// n x n basis: columns D-orthonormal, diagonalizing S.
    v: Array2<f64>,
    /// Pencil eigenvalues of (S, D_reg) matching `v`'s columns.
    s: Array1<f64>,
    /// V^T L_M V.
    lambda: Array2<f64>,
    gamma2: f64,
    /// Effective bracket top: alpha_upper clamped so B stays PD.
    alpha_max: f64,
    /// V^-1 1 and V^T 1, for column re-centering in basis coordinates.
    u_center: Array1<f64>,
    r_center: Array1<f64>,
    /// Anchor iterate in basis coordinates (V^-1 M~).
    w0: Array2<f64>,
    /// Tr(M^T L_M M) and Tr(M^T S M) at the anchor.
    anchor_denom: f64,
    anchor_num: f64,
}

impl StepBasis {
    fn build(m: &Array2<f64>, bundle: &LaplacianBundle, config: &SolverConfig) -> Result<Self> {
        let n = bundle.n;
        let mc = center_columns(m);
        let l_m = laplacian_from_data(&DataMatrix::new(mc.clone())?)?;
        let gamma2 = gamma_squared(&l_m, bundle, config)?;
        let a_u = alpha_upper(&l_m, bundle, config)?;

        let d_reg = bundle.d_x_ridged(config.ridge_eps);
        let sqrt_d = d_reg.mapv(f64::sqrt);
        let inv_sqrt_d = sqrt_d.mapv(|v| 1.0 / v);

        // Eigendecompose W = D^-1/2 S D^-1/2; then V = D^-1/2 U.
        let sarr = bundle.s_xy.as_array();
        let w = Array2::from_shape_fn((n, n), |(i, j)| {
            sarr[[i, j]] * inv_sqrt_d[i] * inv_sqrt_d[j]
        });
        let eig = numerics::sym_eig(&SymMatrix::symmetrized(w)?)?;
        let s_vals = eig.values.mapv(|v| v.max(0.0));
        let mut v = eig.vectors;
        for (i, mut row) in v.rows_mut().into_iter().enumerate() {
            row *= inv_sqrt_d[i];
        }

        // Lambda = V^T L_M V (symmetrized against rounding).
        let lv = l_m.as_array().dot(&v);
        let lambda_raw = v.t().dot(&lv);
        let lambda = 0.5 * (&lambda_raw + &lambda_raw.t());

        // Keep B = gamma^2 I - alpha diag(s) strictly PD in this basis: the
        // pseudo-inverse in the fixed-point operator assumes a PSD argument.
        let s_max = s_vals.iter().fold(0.0f64, |m, &x| m.max(x));
        let pd_cap = if s_max > 0.0 {
            0.999 * gamma2 / s_max
        } else {
            f64::INFINITY
        };
        let alpha_max = a_u.min(pd_cap).max(0.0);

        // V^-1 = U^T D^1/2 applied to ones and to the anchor.
        let u_center = {
            let mut u = Array1::<f64>::zeros(n);
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += v[[i, j]] * d_reg[i]; // (V^T D)_ji = V_ij * d_i
                }
                u[j] = acc;
            }
            u
        };
        let r_center = {
            let mut r = Array1::<f64>::zeros(n);
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += v[[i, j]];
                }
                r[j] = acc;
            }
            r
        };

        let mut scaled = mc.clone();
        for (i, mut row) in scaled.rows_mut().into_iter().enumerate() {
            row *= d_reg[i];
        }
        let w0 = v.t().dot(&scaled); // V^-1 M~ = V^T D M~

        let anchor_denom = quad_trace(&lambda, &w0);
        let anchor_num = {
            let mut acc = 0.0;
            for (i, row) in w0.rows().into_iter().enumerate() {
                let rs: f64 = row.iter().map(|x| x * x).sum();
                acc += s_vals[i] * rs;
            }
            acc
        };

        Ok(Self {
            v,
            s: s_vals,
            lambda,
            gamma2,
            alpha_max,
            u_center,
            r_center,
            w0,
            anchor_denom,
            anchor_num,
        })
    }

    fn map_back(&self, w: &Array2<f64>) -> Array2<f64> {
        self.v.dot(w)
    }

    /// Column-centering of Z = V W expressed on W.
    fn recenter(&self, w: &mut Array2<f64>, n: usize) {
        let proj = self.r_center.dot(w); // 1^T V W, one entry per column
        let scale = 1.0 / n as f64;
        for i in 0..w.nrows() {
            let ui = self.u_center[i] * scale;
            for (j, p) in proj.iter().enumerate() {
                w[[i, j]] -= ui * p;
            }
        }
    }

    fn s_quad(&self, w: &Array2<f64>) -> f64 {
        let mut acc = 0.0;
        for (i, row) in w.rows().into_iter().enumerate() {
            let rs: f64 = row.iter().map(|x| x * x).sum();
            acc += self.s[i] * rs;
        }
        acc
    }

    fn inner_solve(
        &self,
        alpha: f64,
        w_start: &Array2<f64>,
        config: &SolverConfig,
    ) -> Result<InnerSolve> {
        let n = w_start.nrows();
        let denom = self.s.mapv(|si| self.gamma2 - alpha * si);
        if denom.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::DegeneratePencil {
                context: "gamma^2 D - alpha S lost positive definiteness",
            });
        }
        let w_norm0 = w_start.iter().map(|x| x * x).sum::<f64>().sqrt();

        let mut w = w_start.clone();
        let mut lw = self.lambda.dot(&w);
        let mut h_prev = w.iter().zip(lw.iter()).map(|(a, b)| a * b).sum::<f64>()
            - alpha * self.s_quad(&w);
        let mut h_values = vec![h_prev];
        let mut iters = 0usize;

        for t in 1..=config.t_max {
            // One fixed-point step in basis coordinates, then re-center the
            // columns (H preserves the objective on the centered subspace).
            for i in 0..n {
                let di = 1.0 / denom[i];
                for j in 0..w.ncols() {
                    w[[i, j]] = (self.gamma2 * w[[i, j]] - lw[[i, j]]) * di;
                }
            }
            self.recenter(&mut w, n);

            let w_norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !w_norm.is_finite() {
                return Err(Error::NonFinite {
                    context: "fixed-point iterate diverged (alpha/gamma bound violated?)",
                });
            }
            if w_norm < 1e-12 * w_norm0 {
                return Err(Error::NoProgress {
                    context: "fixed-point iterate collapsed toward zero",
                });
            }

            lw = self.lambda.dot(&w);
            let h = w.iter().zip(lw.iter()).map(|(a, b)| a * b).sum::<f64>()
                - alpha * self.s_quad(&w);
            if !h.is_finite() {
                return Err(Error::NonFinite {
                    context: "H value became non-finite",
                });
            }
            h_values.push(h);
            iters = t;
            if w_norm > 1e6 * w_norm0 {
                // Expansive-pencil regime (H(.;alpha) unbounded below): the
                // iterate has settled into the growing eigenspace and further
                // steps only inflate its scale, which g and f ignore. Stop
                // before the quartic trace terms overflow.
                break;
            }
            if (h - h_prev).abs() < config.inner_tol {
                break;
            }
            h_prev = h;
        }

        Ok(InnerSolve {
            w,
            f_alpha: *h_values.last().expect("at least the warm-start H"),
            iters,
            h_values,
        })
    }
}

struct InnerSolve {
    w: Array2<f64>,
    f_alpha: f64,
    iters: usize,
    h_values: Vec<f64>,
}

struct Probe {
    alpha: f64,
    solve: InnerSolve,
}

/// All probe solves of one golden-section search plus the midpoint solve.
struct GoldenOutcome {
    probes: Vec<Probe>,
    alpha_mid: f64,
    total_iters: usize,
}

fn golden_search(basis: &StepBasis, config: &SolverConfig) -> Result<GoldenOutcome> {
    let mut probes: Vec<Probe> = Vec::new();
    let mut total_iters = 0usize;

    let mut warm = basis.w0.clone();
    let w0_norm = basis.w0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let solve_at = |alpha: f64,
                        warm: &mut Array2<f64>,
                        total_iters: &mut usize|
     -> Option<InnerSolve> {
        match basis.inner_solve(alpha, warm, config) {
            Ok(s) => {
                *total_iters += s.iters;
                // Warm-start the next probe from this minimizer's direction,
                // renormalized to the anchor's scale: probe magnitudes are
                // gauge (g and f are scale-invariant) and letting them ratchet
                // across probes would eventually overflow the quartic traces.
                let nrm = s.w.iter().map(|x| x * x).sum::<f64>().sqrt();
                *warm = if nrm > 0.0 {
                    &s.w * (w0_norm / nrm)
                } else {
                    basis.w0.clone()
                };
                Some(s)
            }
            // A single failed probe (collapse / divergence) is dropped from
            // the candidate set; the search continues on the rest.
            Err(_) => None,
        }
    };

    let mut a_l = 0.0f64;
    let mut a_u = basis.alpha_max;
    if !(a_u > 0.0) {
        // Degenerate bracket: only the alpha = 0 subproblem exists.
        let s = basis.inner_solve(0.0, &basis.w0, config)?;
        total_iters += s.iters;
        probes.push(Probe { alpha: 0.0, solve: s });
        return Ok(GoldenOutcome {
            probes,
            alpha_mid: 0.0,
            total_iters,
        });
    }

    let eta = (5.0f64.sqrt() - 1.0) / 2.0;
    let eps_a = config.alpha_tol * (a_u - a_l);

    let mut beta = a_u + eta * (a_l - a_u);
    let mut delta = a_l + eta * (a_u - a_l);
    let mut f_beta = solve_at(beta, &mut warm, &mut total_iters).map(|s| {
        let f = s.f_alpha;
        probes.push(Probe { alpha: beta, solve: s });
        f
    });
    let mut f_delta = solve_at(delta, &mut warm, &mut total_iters).map(|s| {
        let f = s.f_alpha;
        probes.push(Probe { alpha: delta, solve: s });
        f
    });

    let mut guard = 0;
    while (a_u - a_l) > eps_a && guard < 128 {
        guard += 1;
        // Maximize F(alpha): keep the sub-bracket around the larger probe.
        // A failed probe compares as -inf so the bracket moves away from it.
        let fb = f_beta.unwrap_or(f64::NEG_INFINITY);
        let fd = f_delta.unwrap_or(f64::NEG_INFINITY);
        if fb > fd {
            a_u = delta;
            delta = beta;
            f_delta = f_beta;
            beta = a_u + eta * (a_l - a_u);
            f_beta = solve_at(beta, &mut warm, &mut total_iters).map(|s| {
                let f = s.f_alpha;
                probes.push(Probe { alpha: beta, solve: s });
                f
            });
        } else {
            a_l = beta;
            beta = delta;
            f_beta = f_delta;
            delta = a_l + eta * (a_u - a_l);
            f_delta = solve_at(delta, &mut warm, &mut total_iters).map(|s| {
                let f = s.f_alpha;
                probes.push(Probe { alpha: delta, solve: s });
                f
            });
        }
    }

    let alpha_mid = 0.5 * (a_l + a_u);
    if let Some(s) = solve_at(alpha_mid, &mut warm, &mut total_iters) {
        probes.push(Probe {
            alpha: alpha_mid,
            solve: s,
        });
    }
    if probes.is_empty() {
        return Err(Error::NoProgress {
            context: "every golden-section probe failed",
        });
    }
    Ok(GoldenOutcome {
        probes,
        alpha_mid,
        total_iters,
    })
}

/// Solves the fixed-multiplier subproblem: minimize
/// `H(Z; alpha) = Tr(Z^T L_M Z) - alpha Tr(Z^T S Z)` by the fixed-point
/// iteration `Z_{t+1} = H Z_t` warm-started at `Z_0 = M`, stopping when the
/// H value changes by less than `inner_tol`, the iterate norm has grown by
/// a factor of 1e6 (expansive pencil: H is unbounded below and only the
/// iterate's direction carries information), or `t_max` is reached.
pub fn solve_problem_s(
    alpha: f64,
    m: &Array2<f64>,
    bundle: &LaplacianBundle,
    config: &SolverConfig,
) -> Result<ProblemSSolution> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(
            "alpha must be finite and non-negative".into(),
        ));
    }
    let basis = StepBasis::build(m, bundle, config)?;
    let s = basis.inner_solve(alpha, &basis.w0, config)?;
    Ok(ProblemSSolution {
        f_alpha: s.f_alpha,
        z: basis.map_back(&s.w),
        iters: s.iters,
        h_values: s.h_values,
    })
}

/// Golden-section search over the Dinkelbach multiplier on
/// `[0, alpha_upper]` (clamped so the fixed-point operator stays well
/// posed), probes warm-started from the previous minimizer. Returns the
/// bracket midpoint and the subproblem minimizer solved at it.
pub fn golden_section_alpha(
    m: &Array2<f64>,
    bundle: &LaplacianBundle,
    config: &SolverConfig,
) -> Result<(f64, Array2<f64>)> {
    let basis = StepBasis::build(m, bundle, config)?;
    let outcome = golden_search(&basis, config)?;
    // The midpoint solve is last in probe order; fall back to the closest
    // probe if the midpoint solve failed.
    let chosen = outcome
        .probes
        .iter()
        .min_by(|a, b| {
            let da = (a.alpha - outcome.alpha_mid).abs();
            let db = (b.alpha - outcome.alpha_mid).abs();
            da.total_cmp(&db)
        })
        .expect("probe set is non-empty");
    Ok((outcome.alpha_mid, basis.map_back(&chosen.solve.w)))
}

/// Rescales `Z` so its self-distance trace is exactly `rescale_margin`:
/// `kappa = (rescale_margin / Tr(Z^T L_Z Z))^(1/4)`. Returns the centered,
/// scaled matrix and `kappa`.
pub fn rescale(z: &Array2<f64>, config: &SolverConfig) -> Result<(Array2<f64>, f64)> {
    let t = self_trace(z);
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::DegenerateZ);
    }
    let kappa = (config.rescale_margin / t).powf(0.25);
    Ok((center_columns(z) * kappa, kappa))
}

/// `dcorr2(Z, other)` given the other variable's Laplacian and cached self
/// distance covariance.
fn dcorr2_against(
    z: &Array2<f64>,
    l_other: &Laplacian,
    v_other_other: f64,
    n: usize,
) -> Result<f64> {
    let zdm = DataMatrix::new(z.clone())?;
    let vzo = dcov2_via_laplacian(&zdm, l_other)?;
    let vzz = 2.0 * self_trace(z) / (n * n) as f64;
    if vzz <= 0.0 || v_other_other <= 0.0 {
        return Ok(0.0);
    }
    Ok(vzo / (vzz * v_other_other).sqrt())
}

/// Runs the full DisCoMax optimization.
///
/// Each outer step anchors the surrogate at the current iterate, collects a
/// direction pool (golden-section subproblem solves over the multiplier
/// bracket, leading pencil and data directions, column rebalancing moves),
/// line-searches each direction against the anchor, and accepts the blend
/// with the best objective value among those that keep the ascent chain
/// valid (surrogate no worse than at the anchor, trace contraction,
/// objective itself not decreased). The accepted iterate is rescaled to
/// unit self-distance trace, which pins `f(Z_k) = g(Z_k, Z_k)` at every
/// anchor and makes the recorded objective non-decreasing.
pub fn discomax(
    x: &DataMatrix,
    y: &DataMatrix,
    config: &SolverConfig,
) -> Result<DiscomaxFit> {
    config.validate(x.n())?;
    let bundle = build_bundle(x, y)?;
    discomax_with_bundle(&bundle, config)
}

/// Same as [`discomax`] but reusing a prebuilt bundle.
pub fn discomax_with_bundle(
    bundle: &LaplacianBundle,
    config: &SolverConfig,
) -> Result<DiscomaxFit> {
    let n = bundle.n;
    config.validate(n)?;
    let d = config.dim;

    let mut z = init_z0(n, d)?;
    let mut trace = GmmTrace::default();
    let mut iterates = Vec::new();
    let mut iterates_pre = Vec::new();
    if config.verbose_trace {
        iterates.push(z.clone());
    }

    let mut f_curr = objective_f(&z, bundle)?;
    trace.records.push(OuterRecord {
        k: 0,
        f: f_curr,
        dcorr2_xz: dcorr2_against(&z, &bundle.l_x, bundle.vxx, n)?,
        dcorr2_zy: dcorr2_against(&z, &bundle.l_y, bundle.vyy, n)?,
        alpha_star: 0.0,
        kappa: 1.0,
        inner_iters: 0,
    });

    for k in 1..=config.max_outer {
        let basis = StepBasis::build(&z, bundle, config)?;
        let outcome = golden_search(&basis, config)?;

        let c_trace = basis.anchor_denom; // Tr(Z_k^T L_{Z_k} Z_k)
        let g_anchor = if c_trace > 0.0 {
            basis.anchor_num / c_trace
        } else {
            return Err(Error::DegenerateDenominator);
        };

        // Candidate selection. The inner solves return search directions,
        // not finished steps: the anchor Laplacian has rank <= d, so the
        // surrogate is unbounded on its null space and the fixed-point
        // iterates drift there — a pure probe typically trades most of the
        // anchor's objective value for surrogate value. Each probe direction
        // is therefore line-searched against the anchor over
        // Z(theta) = (1-theta) Z_k + theta Zp, with Zp the probe at unit
        // self-distance trace. For a direction Gram-orthogonal to the anchor
        // f(Z(theta)) = (f_k + u f_p)/sqrt(1+u^2) with u = theta^2/(1-theta)^2,
        // so small blends strictly improve f whenever the direction carries
        // any S energy; this is what produces the objective's step-wise
        // jumps. All blend quantities reduce to precomputed scalars and
        // d x d Grams, making the theta sweep O(d^2) per point.
        //
        // Chain bookkeeping on the candidates:
        // * Magnitudes are gauge (g and f are scale-invariant; the raw
        //   iterates shrink or grow freely), while the trace-contraction
        //   chain Tr(Z'^T L_{Z'} Z') <= Tr(Z'^T L_{Z_k} Z') <=
        //   Tr(Z_k^T L_{Z_k} Z_k) is scale-dependent. Accepted candidates
        //   are stored at the canonical scale tau^2 = b/a that turns the
        //   first inequality into an equality; the second then holds
        //   automatically because b becomes cos^2 * c, with cos the Gram
        //   cosine between candidate and anchor.
        // * The surrogate majorizes f away from the anchor (Cauchy-Schwarz
        //   on the centered Grams: b^2 <= a*c), so surrogate ascent cannot
        //   certify f-ascent; the objective is compared directly, which
        //   keeps the recorded f sequence non-decreasing by construction.
        struct Candidate {
            f: f64,
            g: f64,
            alpha: f64,
            theta: f64,
            zp: Array2<f64>,
            wp: Array2<f64>,
        }
        const THETA_GRID: [f64; 14] = [
            0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0,
        ];
        let mut best: Option<Candidate> = None;
        let lam_w0 = basis.lambda.dot(&basis.w0);
        let gram_anchor = z.t().dot(&z); // anchor is column-centered

        // Direction pool: the golden-section probes, plus the leading pencil
        // directions of (S, D). The probes chase the surrogate into the
        // anchor Laplacian's null space, so directions that overlap the
        // anchor — the ones that can still raise the numerator once the
        // orthogonal complement is exhausted — are systematically missing
        // from them; the numerator's own principal directions fill that gap.
        // Entries are (alpha tag, Zp, w-coords, Tr(Zp' L_M Zp), Tr(Zp' S Zp))
        // with Zp centered at unit self-distance trace.
        let mut pool: Vec<(f64, Array2<f64>, Array2<f64>, f64, f64)> = Vec::new();
        for probe in &outcome.probes {
            let w = &probe.solve.w;
            let b_raw = quad_trace(&basis.lambda, w); // Tr(Zp^T L_{Z_k} Zp)
            if !(b_raw > 0.0 && b_raw.is_finite()) {
                continue;
            }
            let num_raw = basis.s_quad(w); // Tr(Zp^T S Zp)
            let z_raw = basis.map_back(w);
            let a_raw = self_trace(&z_raw); // Tr(Zp^T L_{Zp} Zp)
            if !(a_raw > 0.0 && a_raw.is_finite()) {
                continue;
            }
            // Unit self-trace representative; every blend scalar below is
            // O(1) in this normalization.
            let scale = a_raw.powf(-0.25);
            pool.push((
                probe.alpha,
                &z_raw * scale,
                w * scale,
                scale * scale * b_raw,
                scale * scale * num_raw,
            ));
        }
        let s_top = basis.s.iter().cloned().fold(0.0f64, f64::max);
        if s_top > 0.0 {
            let d_reg = bundle.d_x_ridged(config.ridge_eps);
            // w-coordinates of an arbitrary centered Zp via V^-1 = V^T D, so
            // the mixed-term scalars stay coordinate-consistent with the
            // probe candidates.
            let w_of = |zc: &Array2<f64>| {
                let mut scaled = zc.clone();
                for (r, mut row) in scaled.rows_mut().into_iter().enumerate() {
                    row *= d_reg[r];
                }
                basis.v.t().dot(&scaled)
            };
            let push = |pool: &mut Vec<(f64, Array2<f64>, Array2<f64>, f64, f64)>,
                        z_raw: Array2<f64>,
                        wp: Array2<f64>| {
                let a = self_trace(&z_raw);
                if !(a > 0.0 && a.is_finite()) {
                    return;
                }
                let sc = a.powf(-0.25);
                let zp = &z_raw * sc;
                let wps = &wp * sc;
                let p11 = quad_trace(&basis.lambda, &wps);
                let q11 = basis.s_quad(&wps);
                if !(p11 > 0.0 && p11.is_finite() && q11.is_finite()) {
                    return;
                }
                pool.push((0.0, zp, wps, p11, q11));
            };

            let mut order: Vec<usize> = (0..basis.s.len())
                .filter(|&i| basis.s[i] > 1e-9 * s_top)
                .collect();
            order.sort_by(|&i, &j| basis.s[j].total_cmp(&basis.s[i]));
            order.truncate(4);

            // Which column a direction enters decides which anchor column it
            // merges with under blending; for wide embeddings only the
            // weakest anchor columns (plus the strongest, for rebalancing)
            // are worth targeting.
            let cols: Vec<usize> = if d <= 4 {
                (0..d).collect()
            } else {
                let mut idx: Vec<usize> = (0..d).collect();
                idx.sort_by(|&i, &j| gram_anchor[[i, i]].total_cmp(&gram_anchor[[j, j]]));
                let mut c: Vec<usize> = idx[..3].to_vec();
                c.push(idx[d - 1]);
                c
            };
            for &i in &order {
                let vcol = basis.v.column(i);
                let mean = vcol.sum() / n as f64;
                for &j in &cols {
                    let mut z_raw = Array2::<f64>::zeros((n, d));
                    for r in 0..n {
                        z_raw[[r, j]] = vcol[r] - mean;
                    }
                    let wp = w_of(&z_raw);
                    push(&mut pool, z_raw, wp);
                }
            }
            // The same placements for the data-native directions (response
            // direction, then input principal directions). Unlike the pencil
            // directions these live in plain geometry — the one the
            // objective's Gram terms see.
            for dir in &bundle.data_dirs {
                for &j in &cols {
                    let mut z_raw = Array2::<f64>::zeros((n, d));
                    for r in 0..n {
                        z_raw[[r, j]] = dir[r];
                    }
                    let wp = w_of(&z_raw);
                    push(&mut pool, z_raw, wp);
                }
            }
            // Fresh restarts spanning the data-native directions outright.
            // The best mix is rarely equal-weight — a dominant direction
            // plus progressively damped companions usually scores higher
            // than either extreme — so several decay profiles go in and the
            // filter keeps whichever one (if any) beats the anchor.
            if !bundle.data_dirs.is_empty() {
                for &rho in &[1.0, 0.7, 0.5, 0.35] {
                    let mut z_raw = Array2::<f64>::zeros((n, d));
                    let mut wgt = 1.0;
                    for (c, dir) in bundle.data_dirs.iter().take(d).enumerate() {
                        for r in 0..n {
                            z_raw[[r, c]] = wgt * dir[r];
                        }
                        wgt *= rho;
                    }
                    let wp = w_of(&z_raw);
                    push(&mut pool, z_raw, wp);
                    if bundle.data_dirs.len() < 2 {
                        break; // single direction: profiles coincide
                    }
                }
            }
            // Column attenuation: blending the anchor with a copy of itself
            // minus one column sweeps that column's relative weight, letting
            // the search rebalance what it has already accumulated.
            if d > 1 {
                for j in 0..d {
                    let mut z_raw = z.clone();
                    let mut wp = basis.w0.clone();
                    for r in 0..n {
                        z_raw[[r, j]] = 0.0;
                        wp[[r, j]] = 0.0;
                    }
                    push(&mut pool, z_raw, wp);
                }
            }
        }

        for (alpha_tag, zp, wp, p11, q11) in &pool {
            let (p11, q11) = (*p11, *q11);
            let p01: f64 = wp.iter().zip(lam_w0.iter()).map(|(x, y)| x * y).sum();
            let q01 = {
                let mut acc = 0.0;
                for (i, (r0, rp)) in basis.w0.rows().into_iter().zip(wp.rows()).enumerate() {
                    let dot: f64 = r0.iter().zip(rp.iter()).map(|(x, y)| x * y).sum();
                    acc += basis.s[i] * dot;
                }
                acc
            };
            let cross = z.t().dot(zp);
            let gram_probe = zp.t().dot(zp);

            for &theta in THETA_GRID.iter() {
                let s0 = 1.0 - theta;
                let num =
                    s0 * s0 * basis.anchor_num + 2.0 * theta * s0 * q01 + theta * theta * q11;
                let b_tr = s0 * s0 * c_trace + 2.0 * theta * s0 * p01 + theta * theta * p11;
                if !(num > 0.0 && b_tr > 0.0) {
                    continue;
                }
                // Gram of the centered mix drives the quartic self trace.
                let mut a_tr = 0.0;
                for i in 0..gram_anchor.nrows() {
                    for j in 0..gram_anchor.ncols() {
                        let gij = s0 * s0 * gram_anchor[[i, j]]
                            + theta * s0 * (cross[[i, j]] + cross[[j, i]])
                            + theta * theta * gram_probe[[i, j]];
                        a_tr += gij * gij;
                    }
                }
                a_tr *= 2.0;
                if !(a_tr > 0.0) {
                    continue;
                }
                let f_cand = num / a_tr.sqrt();
                let g_cand = num / b_tr;

                // In the tau^2 = b/a gauge own-contraction is an equality and
                // the anchor contraction reads b^2/a = cos^2 * c <= c.
                let contraction_anchor = b_tr * b_tr / a_tr <= c_trace + 1e-8;
                let surrogate_ascent = g_cand >= g_anchor - 1e-9;
                let objective_ascent = f_cand >= f_curr - 1e-9;
                if !(contraction_anchor && surrogate_ascent && objective_ascent) {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(b) => f_cand > b.f || (f_cand == b.f && g_cand > b.g),
                };
                if better {
                    best = Some(Candidate {
                        f: f_cand,
                        g: g_cand,
                        alpha: *alpha_tag,
                        theta,
                        zp: zp.clone(),
                        wp: wp.clone(),
                    });
                }
            }
        }

        let Some(chosen) = best else {
            // No blend preserves the ascent chain: the surrogate offers no
            // accessible improvement, i.e. we've converged.
            break;
        };

        // Materialize the chosen blend and pin it to the contraction gauge.
        let s0 = 1.0 - chosen.theta;
        let z_mix = &z * s0 + &chosen.zp * chosen.theta;
        let w_mix = &basis.w0 * s0 + &chosen.wp * chosen.theta;
        let a_mix = self_trace(&z_mix);
        let b_mix = quad_trace(&basis.lambda, &w_mix);
        if !(a_mix > 0.0 && b_mix > 0.0) {
            break;
        }
        let tau = (b_mix / a_mix).sqrt();
        let z_cand = z_mix * tau;
        let alpha_chosen = chosen.alpha;

        if config.verbose_trace {
            iterates_pre.push(z_cand.clone());
        }
        let (z_next, kappa) = rescale(&z_cand, config)?;
        if config.verbose_trace {
            iterates.push(z_next.clone());
        }
        let diff = (&z_next - &z)
            .iter()
            .map(|v| v * v)
            .sum::<f64>();
        let z_scale = z.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);

        let f_next = objective_f(&z_next, bundle)?;
        if f_next < f_curr - 1e-8 {
            return Err(Error::NoProgress {
                context: "objective decreased beyond tolerance (bound selection bug?)",
            });
        }

        z = z_next;
        f_curr = f_next;
        trace.records.push(OuterRecord {
            k,
            f: f_curr,
            dcorr2_xz: dcorr2_against(&z, &bundle.l_x, bundle.vxx, n)?,
            dcorr2_zy: dcorr2_against(&z, &bundle.l_y, bundle.vyy, n)?,
            alpha_star: alpha_chosen,
            kappa,
            inner_iters: outcome.total_iters,
        });
        if config.verbose_trace {
            // Steps taken on a numerator-direction candidate (alpha tag 0)
            // have no subproblem solve behind them; keep the row so inner_h
            // stays aligned with the outer records.
            let h = outcome
                .probes
                .iter()
                .find(|p| p.alpha == alpha_chosen)
                .map(|p| p.solve.h_values.clone())
                .unwrap_or_default();
            trace.inner_h.push(h);
        }

        if diff < config.outer_tol * z_scale {
            break;
        }
    }

    Ok(DiscomaxFit {
        f_final: f_curr,
        z,
        trace,
        iterates,
        iterates_pre,
    })
}
