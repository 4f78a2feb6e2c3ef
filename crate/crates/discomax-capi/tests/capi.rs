//! Exercises the C ABI end to end from Rust: lifecycle, error reporting,
//! and the generated header.

use std::ffi::CStr;

use discomax_capi::{
    dcm_config_default, dcm_dcorr2, dcm_last_error, dcm_model_dim, dcm_model_embed,
    dcm_model_fit, dcm_model_free, dcm_model_objective, dcm_model_predict,
    dcm_model_train_rows, dcm_version, DcmConfig, DcmModel, DcmStatus,
};

/// Deterministic pseudo-random doubles in (-1, 1) without pulling in an RNG
/// dependency: xorshift64*.
struct Gen(u64);

impl Gen {
    fn next_f64(&mut self) -> f64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        let bits = x.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 11;
        bits as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

/// Training toy: three features, response riding on the first one.
fn toy_data(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut g = Gen(0x9E3779B97F4A7C15);
    let mut x = Vec::with_capacity(n * 3);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a = g.next_f64();
        let b = g.next_f64();
        let c = g.next_f64();
        x.extend_from_slice(&[a, b, c]);
        y.push(2.0 * a);
    }
    (x, y)
}

fn last_error_string() -> String {
    unsafe { CStr::from_ptr(dcm_last_error()).to_string_lossy().into_owned() }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(dcm_version()) };
    let s = v.to_str().unwrap();
    assert!(!s.is_empty());
    assert!(s.chars().next().unwrap().is_ascii_digit());
}

#[test]
fn dcorr2_of_identical_samples_is_one() {
    let (x, _) = toy_data(30);
    let mut out = f64::NAN;
    let status = unsafe { dcm_dcorr2(x.as_ptr(), 30, 3, x.as_ptr(), 3, &mut out) };
    assert_eq!(status, DcmStatus::DCM_OK);
    assert!((out - 1.0).abs() < 1e-12, "dcorr2 = {out}");
}

#[test]
fn null_pointers_are_rejected_with_a_message() {
    let mut out = f64::NAN;
    let status =
        unsafe { dcm_dcorr2(std::ptr::null(), 10, 2, std::ptr::null(), 2, &mut out) };
    assert_eq!(status, DcmStatus::DCM_NULL_POINTER);
    assert!(!last_error_string().is_empty());

    let status = unsafe {
        dcm_model_fit(
            std::ptr::null(),
            10,
            2,
            std::ptr::null(),
            std::ptr::null(),
            std::ptr::null_mut(),
        )
    };
    assert_eq!(status, DcmStatus::DCM_NULL_POINTER);
}

#[test]
fn config_default_round_trips_through_fit() {
    let mut cfg = unsafe { std::mem::zeroed::<DcmConfig>() };
    let status = unsafe { dcm_config_default(&mut cfg) };
    assert_eq!(status, DcmStatus::DCM_OK);
    assert_eq!(cfg.dim, 2);
    assert!(cfg.gamma_margin > 1.0);
    assert_eq!(cfg.alpha_bound, 0);

    cfg.dim = 1; // invalid on purpose
    let (x, y) = toy_data(30);
    let mut model: *mut DcmModel = std::ptr::null_mut();
    let status =
        unsafe { dcm_model_fit(x.as_ptr(), 30, 3, y.as_ptr(), &cfg, &mut model) };
    assert_eq!(status, DcmStatus::DCM_INVALID_ARGUMENT);
    assert!(model.is_null());
    assert!(last_error_string().contains("dimension"));

    cfg.alpha_bound = 7;
    let status =
        unsafe { dcm_model_fit(x.as_ptr(), 30, 3, y.as_ptr(), &cfg, &mut model) };
    assert_eq!(status, DcmStatus::DCM_INVALID_ARGUMENT);
}

#[test]
fn fit_embed_predict_lifecycle() {
    let n = 40;
    let (x, y) = toy_data(n);
    let mut model: *mut DcmModel = std::ptr::null_mut();
    let status = unsafe {
        dcm_model_fit(x.as_ptr(), n, 3, y.as_ptr(), std::ptr::null(), &mut model)
    };
    assert_eq!(status, DcmStatus::DCM_OK, "fit failed: {}", last_error_string());
    assert!(!model.is_null());

    unsafe {
        assert_eq!(dcm_model_dim(model), 2);
        assert_eq!(dcm_model_train_rows(model), n);
        let f = dcm_model_objective(model);
        assert!(f.is_finite() && f > 0.0, "objective = {f}");

        // Embed a handful of fresh rows.
        let fresh = [0.1, -0.2, 0.3, -0.4, 0.5, -0.6];
        let mut z = [f64::NAN; 4];
        let status = dcm_model_embed(model, fresh.as_ptr(), 2, 3, z.as_mut_ptr());
        assert_eq!(status, DcmStatus::DCM_OK);
        assert!(z.iter().all(|v| v.is_finite()));

        // Column-count mismatch is an argument error, not a crash.
        let status = dcm_model_embed(model, fresh.as_ptr(), 3, 2, z.as_mut_ptr());
        assert_eq!(status, DcmStatus::DCM_INVALID_ARGUMENT);

        // Training rows predicted in original units should track 2*x0.
        let mut yhat = vec![f64::NAN; n];
        let status = dcm_model_predict(model, x.as_ptr(), n, 3, yhat.as_mut_ptr());
        assert_eq!(status, DcmStatus::DCM_OK);
        let rms = (yhat
            .iter()
            .zip(y.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        assert!(rms < 0.5, "training rms = {rms}");

        dcm_model_free(model);
        dcm_model_free(std::ptr::null_mut()); // null is a no-op
    }
}

#[test]
fn degenerate_response_is_a_numerical_error() {
    let (x, _) = toy_data(25);
    let y = vec![3.5; 25];
    let mut model: *mut DcmModel = std::ptr::null_mut();
    let status = unsafe {
        dcm_model_fit(x.as_ptr(), 25, 3, y.as_ptr(), std::ptr::null(), &mut model)
    };
    assert_eq!(status, DcmStatus::DCM_NUMERICAL_ERROR);
    assert!(model.is_null());
    assert!(!last_error_string().is_empty());
}

#[test]
fn header_is_generated_with_the_full_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("discomax.h");
    let text = std::fs::read_to_string(&header).expect("generated header");
    for needle in [
        "DISCOMAX_H",
        "DcmStatus",
        "DcmConfig",
        "DcmModel",
        "dcm_version",
        "dcm_last_error",
        "dcm_config_default",
        "dcm_dcorr2",
        "dcm_model_fit",
        "dcm_model_embed",
        "dcm_model_predict",
        "dcm_model_free",
        "DCM_OK",
    ] {
        assert!(text.contains(needle), "header is missing {needle}");
    }
}
