//! C ABI over the analysis pipeline and the learner bench.
//!
//! Every entry point returns an [`MbStatus`]; when a call fails, the
//! calling thread can fetch a human-readable reason from
//! [`mb_last_error`]. Panics never cross the boundary: they are caught
//! and surfaced as `MB_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use maskbench::config::RunConfig;
use maskbench::eval::{roc_auc, wald_ci};
use maskbench::learners::{Algorithm, ModelSpec, TrainedModel};
use maskbench::pipeline::{run_stage, Stage};
use maskbench::synth::{run_synth_check, SynthSpec};
use maskbench::Error;

/// Result of every call in this header.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbStatus {
    MbOk = 0,
    /// Input files missing or malformed, or a numeric precondition failed.
    MbDataError = 1,
    /// The run configuration itself is invalid.
    MbConfigError = 2,
    /// A verification run completed but its checks did not pass.
    MbAssertionFailed = 3,
    MbNullPointer = 4,
    /// An argument was out of range or not understood (bad tag, bad UTF-8).
    MbInvalidArg = 5,
    /// Internal panic; the library state is still sound, the call did nothing.
    MbPanic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: MbStatus, message: String) -> MbStatus {
    let text = CString::new(message.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("unprintable error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
    status
}

fn fail_with(e: &Error) -> MbStatus {
    let status = if e.exit_code() == 2 {
        MbStatus::MbConfigError
    } else {
        MbStatus::MbDataError
    };
    fail(status, e.to_string())
}

/// Runs a closure behind a panic barrier; panics become `MB_PANIC`.
fn guarded<F: FnOnce() -> MbStatus>(f: F) -> MbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(MbStatus::MbPanic, format!("panic: {detail}"))
        }
    }
}

/// Reads a required C string argument.
unsafe fn arg_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, MbStatus> {
    if ptr.is_null() {
        return Err(fail(
            MbStatus::MbNullPointer,
            format!("{name} must not be null"),
        ));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        fail(
            MbStatus::MbInvalidArg,
            format!("{name} is not valid UTF-8"),
        )
    })
}

/// Message for the most recent failure on this thread, or null if the
/// last call succeeded. The pointer stays valid until the next failing
/// call on the same thread.
#[no_mangle]
pub extern "C" fn mb_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn mb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Runs the pipeline end to end and writes all artifacts to `out_dir`.
///
/// `config_path` may be null to use `./config.toml` when present and
/// built-in defaults otherwise. A non-negative `seed_override` replaces
/// the configured seed. `tuned` selects the hyperparameter-searched run;
/// otherwise every learner uses its default settings.
///
/// # Safety
/// `config_path` must be null or a valid nul-terminated string, and
/// `out_dir` a valid nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mb_run_pipeline(
    config_path: *const c_char,
    out_dir: *const c_char,
    seed_override: i64,
    tuned: bool,
) -> MbStatus {
    guarded(|| {
        let config_path = if config_path.is_null() {
            None
        } else {
            match arg_str(config_path, "config_path") {
                Ok(s) => Some(s),
                Err(status) => return status,
            }
        };
        let out_dir = match arg_str(out_dir, "out_dir") {
            Ok(s) => s,
            Err(status) => return status,
        };

        let mut cfg = match RunConfig::load(config_path.map(Path::new)) {
            Ok(cfg) => cfg,
            Err(e) => return fail_with(&e),
        };
        if seed_override >= 0 {
            cfg.seed = seed_override as u64;
        }
        let stage = if tuned { Stage::Report } else { Stage::Evaluate };
        match run_stage(&cfg, Path::new(out_dir), stage) {
            Ok(_) => MbStatus::MbOk,
            Err(e) => fail_with(&e),
        }
    })
}

/// Generates synthetic inputs in `work_dir`, runs the pipeline over
/// them, and checks that known labels are recovered. With `shuffle`
/// set, covariates are permuted across counties and every learner must
/// fall back to chance-level accuracy instead.
///
/// Returns `MB_ASSERTION_FAILED` when the run completes but a check
/// fails; the error text names the first offending learner.
///
/// # Safety
/// `work_dir` must be a valid nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mb_synth_check(
    n_counties: usize,
    class_balance: f64,
    noise_scale: f64,
    seed: u64,
    work_dir: *const c_char,
    shuffle: bool,
) -> MbStatus {
    guarded(|| {
        let work_dir = match arg_str(work_dir, "work_dir") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let spec = SynthSpec {
            n_counties,
            class_balance,
            noise_scale,
            seed,
            ..SynthSpec::default()
        };
        let check = match run_synth_check(&spec, Path::new(work_dir), shuffle) {
            Ok(check) => check,
            Err(e) => return fail_with(&e),
        };
        if check.passed {
            return MbStatus::MbOk;
        }
        let detail = check
            .outcomes
            .iter()
            .find(|o| !o.passed)
            .map(|o| format!("{} at accuracy {}", o.algorithm, o.test_accuracy))
            .unwrap_or_else(|| format!("{} label mismatches", check.label_mismatches));
        fail(
            MbStatus::MbAssertionFailed,
            format!("synthetic check failed: {detail}"),
        )
    })
}

/// A trained classifier behind an opaque handle.
pub struct MbModel {
    inner: TrainedModel,
}

fn matrix(x: &[f64], n_cols: usize) -> Vec<Vec<f64>> {
    x.chunks_exact(n_cols).map(|r| r.to_vec()).collect()
}

/// Trains one classifier on a row-major matrix.
///
/// `algorithm` is one of the bench tags (`naive_bayes`,
/// `logistic_regression`, `knn`, `decision_tree`, `random_forest`,
/// `extra_trees`, `gradient_boosting`, `svm_rbf`, `mlp`). `x` holds
/// `n_rows * n_cols` values; `y` holds `n_rows` labels where nonzero
/// means the positive class. On success `*out_model` owns the model and
/// must be released with [`mb_model_free`].
///
/// # Safety
/// `algorithm` must be a valid nul-terminated string, `x` must point to
/// `n_rows * n_cols` readable doubles, `y` to `n_rows` readable bytes,
/// and `out_model` to a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn mb_train(
    algorithm: *const c_char,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    y: *const u8,
    seed: u64,
    out_model: *mut *mut MbModel,
) -> MbStatus {
    guarded(|| {
        let tag = match arg_str(algorithm, "algorithm") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if x.is_null() || y.is_null() || out_model.is_null() {
            return fail(
                MbStatus::MbNullPointer,
                "x, y and out_model must not be null".to_string(),
            );
        }
        if n_rows == 0 || n_cols == 0 {
            return fail(
                MbStatus::MbInvalidArg,
                format!("empty training matrix: {n_rows} x {n_cols}"),
            );
        }
        let Some(alg) = Algorithm::from_tag(tag) else {
            return fail(
                MbStatus::MbInvalidArg,
                format!("unknown algorithm tag {tag:?}"),
            );
        };

        let xs = std::slice::from_raw_parts(x, n_rows * n_cols);
        let ys = std::slice::from_raw_parts(y, n_rows);
        let rows = matrix(xs, n_cols);
        let labels: Vec<bool> = ys.iter().map(|&v| v != 0).collect();

        match ModelSpec::default_for(alg, seed).train(&rows, &labels) {
            Ok(model) => {
                *out_model = Box::into_raw(Box::new(MbModel { inner: model }));
                MbStatus::MbOk
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Scores a row-major matrix with a trained model, writing one value in
/// [0, 1] per row to `out_scores`.
///
/// # Safety
/// `model` must come from a successful [`mb_train`] and not yet be
/// freed, `x` must point to `n_rows * n_cols` readable doubles, and
/// `out_scores` to `n_rows` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mb_predict_scores(
    model: *const MbModel,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_scores: *mut f64,
) -> MbStatus {
    guarded(|| {
        if model.is_null() || x.is_null() || out_scores.is_null() {
            return fail(
                MbStatus::MbNullPointer,
                "model, x and out_scores must not be null".to_string(),
            );
        }
        if n_rows == 0 || n_cols == 0 {
            return fail(
                MbStatus::MbInvalidArg,
                format!("empty prediction matrix: {n_rows} x {n_cols}"),
            );
        }
        let xs = std::slice::from_raw_parts(x, n_rows * n_cols);
        let rows = matrix(xs, n_cols);
        match (*model).inner.predict_score(&rows) {
            Ok(scores) => {
                std::ptr::copy_nonoverlapping(scores.as_ptr(), out_scores, n_rows);
                MbStatus::MbOk
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Releases a model returned by [`mb_train`]. Null is a no-op.
///
/// # Safety
/// `model` must be null or a pointer from [`mb_train`] that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn mb_model_free(model: *mut MbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Area under the ROC curve for scores against byte labels (nonzero
/// means positive). Both classes must be present.
///
/// # Safety
/// `scores` must point to `n` readable doubles, `labels` to `n`
/// readable bytes, and `out_auc` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mb_auc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out_auc: *mut f64,
) -> MbStatus {
    guarded(|| {
        if scores.is_null() || labels.is_null() || out_auc.is_null() {
            return fail(
                MbStatus::MbNullPointer,
                "scores, labels and out_auc must not be null".to_string(),
            );
        }
        let s = std::slice::from_raw_parts(scores, n);
        let l: Vec<bool> = std::slice::from_raw_parts(labels, n)
            .iter()
            .map(|&v| v != 0)
            .collect();
        match roc_auc(s, &l) {
            Ok((_, auc)) => {
                *out_auc = auc;
                MbStatus::MbOk
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Half-width of the Wald confidence interval for an accuracy measured
/// on `n_test` samples at critical value `z`.
///
/// # Safety
/// `out_half_width` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mb_wald_ci(
    score: f64,
    n_test: usize,
    z: f64,
    out_half_width: *mut f64,
) -> MbStatus {
    guarded(|| {
        if out_half_width.is_null() {
            return fail(
                MbStatus::MbNullPointer,
                "out_half_width must not be null".to_string(),
            );
        }
        match wald_ci(score, n_test, z) {
            Ok(half) => {
                *out_half_width = half;
                MbStatus::MbOk
            }
            Err(e) => fail_with(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_nul_terminated_package_version() {
        let v = unsafe { CStr::from_ptr(mb_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn last_error_starts_null_and_latches_failures() {
        assert!(mb_last_error().is_null());
        let status = unsafe {
            mb_wald_ci(0.5, 0, 1.96, std::ptr::null_mut())
        };
        assert_eq!(status, MbStatus::MbNullPointer);
        let msg = unsafe { CStr::from_ptr(mb_last_error()) };
        assert!(msg.to_str().unwrap().contains("out_half_width"));
    }
}
