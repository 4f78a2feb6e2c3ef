//! C ABI for the distance-correlation embedding toolkit.
//!
//! Conventions:
//! - Matrices cross the boundary as row-major `double` buffers with explicit
//!   dimensions; vectors as plain buffers with a length.
//! - Every fallible entry point returns a [`DcmStatus`]; results travel
//!   through out-pointers.
//! - On a non-OK status the calling thread can fetch a description via
//!   [`dcm_last_error`].
//! - A fitted model is an opaque [`DcmModel`] handle owned by the library;
//!   release it with [`dcm_model_free`].
//!
//! The generated header lives at `include/discomax.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use discomax::dcor::{sample_dcorr2, DataMatrix};
use discomax::error::Error;
use discomax::pipeline::{fit_embedding_model, EmbeddingModel, ScaleKind};
use discomax::solver::{AlphaBound, SolverConfig};
use ndarray::{Array1, Array2};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(non_camel_case_types)]
pub enum DcmStatus {
    /// Success.
    DCM_OK = 0,
    /// A required pointer argument was null.
    DCM_NULL_POINTER = 1,
    /// An argument, dimension or configuration field was invalid.
    DCM_INVALID_ARGUMENT = 2,
    /// The computation failed (degenerate data, singular system, panic).
    DCM_NUMERICAL_ERROR = 3,
}

/// Solver knobs, mirroring the library defaults. Fetch a valid baseline with
/// [`dcm_config_default`] and adjust fields from there.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DcmConfig {
    /// Embedding dimension (2 <= dim < number of training rows).
    pub dim: usize,
    /// Outer minorize-maximize iteration cap.
    pub max_outer: usize,
    /// Fixed-point iteration cap per subproblem solve.
    pub t_max: usize,
    /// Outer stop: relative squared change of the embedding.
    pub outer_tol: f64,
    /// Fixed-point stop: absolute change of the subproblem objective.
    pub inner_tol: f64,
    /// Golden-section stop, relative to the initial bracket width.
    pub alpha_tol: f64,
    /// Multiplier (> 1) defining the dominating pencil.
    pub gamma_margin: f64,
    /// Relative ridge on the degree diagonal.
    pub ridge_eps: f64,
    /// Self-distance trace accepted iterates are rescaled to; leave at 1.
    pub rescale_margin: f64,
    /// Golden-section bracket top: 0 = conservative bound (default),
    /// 1 = largest pencil eigenvalue.
    pub alpha_bound: i32,
}

/// Opaque fitted model: the training embedding plus the kernel maps used
/// to embed and predict unseen rows.
pub struct DcmModel {
    inner: EmbeddingModel,
    n_features: usize,
    objective: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    let c = CString::new(sanitized).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn status_of(e: &Error) -> DcmStatus {
    match e {
        Error::InvalidParameter(_)
        | Error::BadDimension { .. }
        | Error::DimensionMismatch { .. }
        | Error::SampleCountMismatch { .. }
        | Error::TooFewSamples { .. }
        | Error::NonSquare { .. } => DcmStatus::DCM_INVALID_ARGUMENT,
        _ => DcmStatus::DCM_NUMERICAL_ERROR,
    }
}

fn fail(e: &Error) -> DcmStatus {
    set_last_error(&e.to_string());
    status_of(e)
}

fn fail_null() -> DcmStatus {
    set_last_error("null pointer argument");
    DcmStatus::DCM_NULL_POINTER
}

fn fail_panic() -> DcmStatus {
    set_last_error("internal panic");
    DcmStatus::DCM_NUMERICAL_ERROR
}

/// Copies a row-major buffer into an owned matrix. Caller must have
/// null-checked the pointer.
unsafe fn matrix_from_raw(ptr: *const f64, rows: usize, cols: usize) -> Result<Array2<f64>, Error> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter(
            "matrix dimensions must be positive".into(),
        ));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::InvalidParameter("matrix size overflows".into()))?;
    let slice = std::slice::from_raw_parts(ptr, len);
    Array2::from_shape_vec((rows, cols), slice.to_vec())
        .map_err(|_| Error::InvalidParameter("matrix shape mismatch".into()))
}

fn solver_config(c: &DcmConfig) -> Result<SolverConfig, Error> {
    let alpha_bound = match c.alpha_bound {
        0 => AlphaBound::LambdaMin,
        1 => AlphaBound::LambdaMax,
        other => {
            return Err(Error::InvalidParameter(format!(
                "alpha_bound must be 0 or 1, got {other}"
            )));
        }
    };
    Ok(SolverConfig {
        dim: c.dim,
        max_outer: c.max_outer,
        t_max: c.t_max,
        outer_tol: c.outer_tol,
        inner_tol: c.inner_tol,
        alpha_tol: c.alpha_tol,
        gamma_margin: c.gamma_margin,
        ridge_eps: c.ridge_eps,
        rescale_margin: c.rescale_margin,
        alpha_bound,
        verbose_trace: false,
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dcm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on the calling thread, as a
/// NUL-terminated string. Never null; empty if nothing failed yet. The
/// pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn dcm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Writes the recommended solver configuration into `out`.
///
/// # Safety
/// `out` must point to writable memory for one `DcmConfig`.
#[no_mangle]
pub unsafe extern "C" fn dcm_config_default(out: *mut DcmConfig) -> DcmStatus {
    if out.is_null() {
        return fail_null();
    }
    let d = SolverConfig::default();
    *out = DcmConfig {
        dim: d.dim,
        max_outer: d.max_outer,
        t_max: d.t_max,
        outer_tol: d.outer_tol,
        inner_tol: d.inner_tol,
        alpha_tol: d.alpha_tol,
        gamma_margin: d.gamma_margin,
        ridge_eps: d.ridge_eps,
        rescale_margin: d.rescale_margin,
        alpha_bound: 0,
    };
    DcmStatus::DCM_OK
}

/// Squared distance correlation between two row-aligned samples:
/// `x` is `n` x `px` row-major, `y` is `n` x `py` row-major. Writes a value
/// in [0, 1] to `out`.
///
/// # Safety
/// `x` must hold `n * px` doubles, `y` must hold `n * py` doubles, and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcm_dcorr2(
    x: *const f64,
    n: usize,
    px: usize,
    y: *const f64,
    py: usize,
    out: *mut f64,
) -> DcmStatus {
    if x.is_null() || y.is_null() || out.is_null() {
        return fail_null();
    }
    let xm = match matrix_from_raw(x, n, px) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let ym = match matrix_from_raw(y, n, py) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let result = catch_unwind(AssertUnwindSafe(move || -> Result<f64, Error> {
        let xd = DataMatrix::new(xm)?;
        let yd = DataMatrix::new(ym)?;
        sample_dcorr2(&xd, &yd)
    }));
    match result {
        Ok(Ok(v)) => {
            *out = v;
            DcmStatus::DCM_OK
        }
        Ok(Err(e)) => fail(&e),
        Err(_) => fail_panic(),
    }
}

/// Fits an embedding model on training data: `x` is `n` x `p` row-major,
/// `y` holds `n` responses. `config` may be null for defaults. On success
/// writes an owned handle to `out_model`; the caller releases it with
/// [`dcm_model_free`].
///
/// # Safety
/// `x` must hold `n * p` doubles, `y` must hold `n` doubles, `config` must
/// be null or point to a valid `DcmConfig`, and `out_model` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dcm_model_fit(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    config: *const DcmConfig,
    out_model: *mut *mut DcmModel,
) -> DcmStatus {
    if x.is_null() || y.is_null() || out_model.is_null() {
        return fail_null();
    }
    let cfg = if config.is_null() {
        SolverConfig::default()
    } else {
        match solver_config(&*config) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        }
    };
    let xm = match matrix_from_raw(x, n, p) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let yv = Array1::from(std::slice::from_raw_parts(y, n).to_vec());
    let result = catch_unwind(AssertUnwindSafe(move || -> Result<DcmModel, Error> {
        let xd = DataMatrix::new(xm)?;
        let yd = DataMatrix::from_column(yv)?;
        let (model, trace) = fit_embedding_model(&xd, &yd, &cfg, ScaleKind::MinMax)?;
        Ok(DcmModel {
            inner: model,
            n_features: p,
            objective: trace.records.last().map(|r| r.f).unwrap_or(f64::NAN),
        })
    }));
    match result {
        Ok(Ok(model)) => {
            *out_model = Box::into_raw(Box::new(model));
            DcmStatus::DCM_OK
        }
        Ok(Err(e)) => fail(&e),
        Err(_) => fail_panic(),
    }
}

/// Embedding dimension of a fitted model; 0 for null.
///
/// # Safety
/// `model` must be null or a live handle from [`dcm_model_fit`].
#[no_mangle]
pub unsafe extern "C" fn dcm_model_dim(model: *const DcmModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).inner.dim()
}

/// Number of training rows baked into a fitted model; 0 for null.
///
/// # Safety
/// `model` must be null or a live handle from [`dcm_model_fit`].
#[no_mangle]
pub unsafe extern "C" fn dcm_model_train_rows(model: *const DcmModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).inner.z_train.nrows()
}

/// Final solver objective (sum of the two squared distance correlations);
/// NaN for null.
///
/// # Safety
/// `model` must be null or a live handle from [`dcm_model_fit`].
#[no_mangle]
pub unsafe extern "C" fn dcm_model_objective(model: *const DcmModel) -> f64 {
    if model.is_null() {
        return f64::NAN;
    }
    (*model).objective
}

/// Embeds `n_rows` unseen rows (`x` is `n_rows` x `p` row-major, `p` equal
/// to the training feature count). Writes `n_rows * dim` doubles, row-major,
/// to `out`.
///
/// # Safety
/// `model` must be a live handle, `x` must hold `n_rows * p` doubles, and
/// `out` must have room for `n_rows * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn dcm_model_embed(
    model: *const DcmModel,
    x: *const f64,
    n_rows: usize,
    p: usize,
    out: *mut f64,
) -> DcmStatus {
    if model.is_null() || x.is_null() || out.is_null() {
        return fail_null();
    }
    let handle = &*model;
    if p != handle.n_features {
        return fail(&Error::DimensionMismatch {
            expected: handle.n_features,
            got: p,
            context: "embed input columns",
        });
    }
    let xm = match matrix_from_raw(x, n_rows, p) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let result = catch_unwind(AssertUnwindSafe(|| handle.inner.embed(&xm)));
    match result {
        Ok(Ok(z)) => {
            for (i, v) in z.iter().enumerate() {
                *out.add(i) = *v;
            }
            DcmStatus::DCM_OK
        }
        Ok(Err(e)) => fail(&e),
        Err(_) => fail_panic(),
    }
}

/// Predicts responses for `n_rows` unseen rows, in original response units.
/// Writes `n_rows` doubles to `out`.
///
/// # Safety
/// `model` must be a live handle, `x` must hold `n_rows * p` doubles, and
/// `out` must have room for `n_rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn dcm_model_predict(
    model: *const DcmModel,
    x: *const f64,
    n_rows: usize,
    p: usize,
    out: *mut f64,
) -> DcmStatus {
    if model.is_null() || x.is_null() || out.is_null() {
        return fail_null();
    }
    let handle = &*model;
    if p != handle.n_features {
        return fail(&Error::DimensionMismatch {
            expected: handle.n_features,
            got: p,
            context: "predict input columns",
        });
    }
    let xm = match matrix_from_raw(x, n_rows, p) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let result = catch_unwind(AssertUnwindSafe(|| handle.inner.predict(&xm)));
    match result {
        Ok(Ok(yhat)) => {
            for (i, v) in yhat.iter().enumerate() {
                *out.add(i) = *v;
            }
            DcmStatus::DCM_OK
        }
        Ok(Err(e)) => fail(&e),
        Err(_) => fail_panic(),
    }
}

/// Releases a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be null or a handle from [`dcm_model_fit`] that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn dcm_model_free(model: *mut DcmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
