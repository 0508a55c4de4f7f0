//! C ABI for the cwoful bandit simulation library.
//!
//! The surface follows the usual C embedding conventions:
//!
//! - opaque handles ([`CwExperiment`], [`CwResult`]) created and destroyed by
//!   this library; callers never see their layout;
//! - every fallible call returns a [`CwStatus`] code and writes its result
//!   through out-pointers;
//! - the last failure message is kept per thread and readable via
//!   [`cw_last_error_message`] until the next failing call on that thread;
//! - strings returned as `const char*` are borrowed: from a static for
//!   [`cw_version`] / [`cw_last_error_message`], from the result handle for
//!   name accessors — valid until the handle is freed.
//!
//! The generated header lives at `include/cwoful.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use cwoful::config::ExperimentConfig;
use cwoful::runner::{execute, ExperimentOutcome, RunOptions};

/// Status code of every fallible FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CwStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The configuration failed to parse or validate.
    InvalidConfig = 3,
    /// Episode execution failed.
    RunFailed = 4,
    /// An index or buffer length was out of range.
    OutOfRange = 5,
    /// A panic was caught at the FFI boundary.
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: impl Into<Vec<u8>>) {
    let message = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

fn fail(status: CwStatus, message: impl std::fmt::Display) -> CwStatus {
    set_last_error(message.to_string());
    status
}

fn guard(body: impl FnOnce() -> CwStatus) -> CwStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(CwStatus::Panic, "panic caught at the FFI boundary"),
    }
}

/// A parsed and validated experiment description.
pub struct CwExperiment {
    config: ExperimentConfig,
    seeds: Option<Vec<u64>>,
}

struct OutcomeView {
    cell: CString,
    policy: CString,
    horizon: usize,
    beta: f64,
    final_mean: f64,
    final_std: f64,
    mean_curve: Vec<f64>,
    confidence_violation_rate: f64,
    hard_checks_ok: bool,
}

/// Finished experiment: per-(cell, policy) aggregates.
pub struct CwResult {
    outcomes: Vec<OutcomeView>,
}

impl CwResult {
    fn from_outcome(outcome: ExperimentOutcome) -> Self {
        let outcomes = outcome
            .outcomes
            .into_iter()
            .map(|o| OutcomeView {
                cell: CString::new(o.cell.clone()).unwrap_or_default(),
                policy: CString::new(o.policy.clone()).unwrap_or_default(),
                horizon: o.horizon,
                beta: o.beta,
                final_mean: o.aggregate.final_mean(),
                final_std: o.aggregate.std.last().copied().unwrap_or(0.0),
                confidence_violation_rate: o.confidence_violation_rate(),
                hard_checks_ok: o.all_hard_checks_ok(),
                mean_curve: o.aggregate.mean,
            })
            .collect();
        Self { outcomes }
    }

    fn get(&self, index: usize) -> Option<&OutcomeView> {
        self.outcomes.get(index)
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cw_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Message of the last failure on this thread; empty until a call fails.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn utf8_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, CwStatus> {
    if ptr.is_null() {
        return Err(fail(CwStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(CwStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn new_experiment(text: &str, out: *mut *mut CwExperiment) -> CwStatus {
    match ExperimentConfig::from_toml_str(text) {
        Ok(config) => {
            let handle = Box::new(CwExperiment {
                config,
                seeds: None,
            });
            unsafe { *out = Box::into_raw(handle) };
            CwStatus::Ok
        }
        Err(err) => fail(CwStatus::InvalidConfig, err),
    }
}

/// Parse an experiment from TOML text into a new handle.
///
/// # Safety
/// `toml_text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_experiment_from_toml(
    toml_text: *const c_char,
    out: *mut *mut CwExperiment,
) -> CwStatus {
    guard(|| {
        if out.is_null() {
            return fail(CwStatus::NullArgument, "out is null");
        }
        match utf8_arg(toml_text, "toml_text") {
            Ok(text) => new_experiment(text, out),
            Err(status) => status,
        }
    })
}

/// Parse an experiment from a TOML file into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_experiment_from_file(
    path: *const c_char,
    out: *mut *mut CwExperiment,
) -> CwStatus {
    guard(|| {
        if out.is_null() {
            return fail(CwStatus::NullArgument, "out is null");
        }
        let path = match utf8_arg(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match std::fs::read_to_string(path) {
            Ok(text) => new_experiment(&text, out),
            Err(err) => fail(CwStatus::InvalidConfig, format!("reading {path}: {err}")),
        }
    })
}

/// Replace the experiment's seed list.
///
/// # Safety
/// `experiment` must come from a `cw_experiment_*` constructor; `seeds` must
/// point to `num_seeds` valid entries.
#[no_mangle]
pub unsafe extern "C" fn cw_experiment_set_seeds(
    experiment: *mut CwExperiment,
    seeds: *const u64,
    num_seeds: usize,
) -> CwStatus {
    guard(|| {
        if experiment.is_null() || seeds.is_null() {
            return fail(CwStatus::NullArgument, "experiment or seeds is null");
        }
        if num_seeds == 0 {
            return fail(CwStatus::OutOfRange, "num_seeds must be at least 1");
        }
        let slice = std::slice::from_raw_parts(seeds, num_seeds);
        (*experiment).seeds = Some(slice.to_vec());
        CwStatus::Ok
    })
}

/// Destroy an experiment handle (null is a no-op).
///
/// # Safety
/// `experiment` must come from a `cw_experiment_*` constructor and must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cw_experiment_free(experiment: *mut CwExperiment) {
    if !experiment.is_null() {
        drop(Box::from_raw(experiment));
    }
}

fn run(experiment: &CwExperiment, out_dir: Option<PathBuf>, out: *mut *mut CwResult) -> CwStatus {
    let options = RunOptions {
        output_root: out_dir.clone(),
        seeds: experiment.seeds.clone(),
        snapshot_interval: None,
        write_files: out_dir.is_some(),
    };
    match execute(&experiment.config, &options) {
        Ok(outcome) => {
            let handle = Box::new(CwResult::from_outcome(outcome));
            unsafe { *out = Box::into_raw(handle) };
            CwStatus::Ok
        }
        Err(err @ cwoful::Error::Config(_)) => fail(CwStatus::InvalidConfig, err),
        Err(err) => fail(CwStatus::RunFailed, err),
    }
}

/// Run all episodes in memory and hand back a result handle.
///
/// # Safety
/// `experiment` must come from a `cw_experiment_*` constructor; `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_experiment_run(
    experiment: *const CwExperiment,
    out: *mut *mut CwResult,
) -> CwStatus {
    guard(|| {
        if experiment.is_null() || out.is_null() {
            return fail(CwStatus::NullArgument, "experiment or out is null");
        }
        run(&*experiment, None, out)
    })
}

/// Run all episodes and also write the CSV/metadata layout under
/// `output_root`, as the `cwoful run` command would.
///
/// # Safety
/// As [`cw_experiment_run`]; `output_root` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cw_experiment_run_to_dir(
    experiment: *const CwExperiment,
    output_root: *const c_char,
    out: *mut *mut CwResult,
) -> CwStatus {
    guard(|| {
        if experiment.is_null() || out.is_null() {
            return fail(CwStatus::NullArgument, "experiment or out is null");
        }
        let dir = match utf8_arg(output_root, "output_root") {
            Ok(p) => PathBuf::from(p),
            Err(status) => return status,
        };
        run(&*experiment, Some(dir), out)
    })
}

/// Destroy a result handle (null is a no-op).
///
/// # Safety
/// `result` must come from a run call and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cw_result_free(result: *mut CwResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of (cell, policy) outcomes in the result.
///
/// # Safety
/// `result` must come from a run call; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_result_outcome_count(
    result: *const CwResult,
    out: *mut usize,
) -> CwStatus {
    guard(|| {
        if result.is_null() || out.is_null() {
            return fail(CwStatus::NullArgument, "result or out is null");
        }
        *out = (*result).outcomes.len();
        CwStatus::Ok
    })
}

unsafe fn with_outcome<T>(
    result: *const CwResult,
    index: usize,
    out: *mut T,
    read: impl FnOnce(&OutcomeView) -> T,
) -> CwStatus {
    if result.is_null() || out.is_null() {
        return fail(CwStatus::NullArgument, "result or out is null");
    }
    match (*result).get(index) {
        Some(view) => {
            *out = read(view);
            CwStatus::Ok
        }
        None => fail(
            CwStatus::OutOfRange,
            format!("outcome index {index} out of range"),
        ),
    }
}

/// Policy name of outcome `index`; borrowed from the result handle.
///
/// # Safety
/// `result` must come from a run call; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_result_policy_name(
    result: *const CwResult,
    index: usize,
    out: *mut *const c_char,
) -> CwStatus {
    guard(|| with_outcome(result, index, out, |v| v.policy.as_ptr()))
}

/// Grid-cell label of outcome `index` (e.g. "d5_K1000_C10"); borrowed from
/// the result handle.
///
/// # Safety
/// `result` must come from a run call; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_result_cell_label(
    result: *const CwResult,
    index: usize,
    out: *mut *const c_char,
) -> CwStatus {
    guard(|| with_outcome(result, index, out, |v| v.cell.as_ptr()))
}

/// Horizon (number of rounds) of outcome `index`.
///
/// # Safety
/// `result` must come from a run call; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_result_horizon(
    result: *const CwResult,
    index: usize,
    out: *mut usize,
) -> CwStatus {
    guard(|| with_outcome(result, index, out, |v| v.horizon))
}

/// Confidence radius β used by outcome `index`.
///
/// # Safety
/// `result` must come from a run call; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_result_beta(
    result: *const CwResult,
    index: usize,
    out: *mut f64,
) -> CwStatus {
    guard(|| with_outcome(result, index, out, |v| v.beta))
}

/// Mean and population standard deviation of the final cumulative regret.
///
/// # Safety
/// `result` must come from a run call; `mean_out` and `std_out` must be
/// valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cw_result_final_regret(
    result: *const CwResult,
    index: usize,
    mean_out: *mut f64,
    std_out: *mut f64,
) -> CwStatus {
    guard(|| {
        if std_out.is_null() {
            return fail(CwStatus::NullArgument, "std_out is null");
        }
        let status = with_outcome(result, index, mean_out, |v| v.final_mean);
        if status != CwStatus::Ok {
            return status;
        }
        let view = (*result).get(index).expect("index checked above");
        *std_out = view.final_std;
        CwStatus::Ok
    })
}

/// Fraction of seeds whose run violated the confidence event at least once.
///
/// # Safety
/// `result` must come from a run call; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_result_confidence_violation_rate(
    result: *const CwResult,
    index: usize,
    out: *mut f64,
) -> CwStatus {
    guard(|| with_outcome(result, index, out, |v| v.confidence_violation_rate))
}

/// Whether every per-seed hard inequality check passed for outcome `index`.
///
/// # Safety
/// `result` must come from a run call; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_result_hard_checks_ok(
    result: *const CwResult,
    index: usize,
    out: *mut bool,
) -> CwStatus {
    guard(|| with_outcome(result, index, out, |v| v.hard_checks_ok))
}

/// Copy the cross-seed mean cumulative-regret curve (one value per round)
/// into `buffer`. `buffer_len` must be at least the outcome's horizon.
///
/// # Safety
/// `result` must come from a run call; `buffer` must point to `buffer_len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cw_result_mean_regret_curve(
    result: *const CwResult,
    index: usize,
    buffer: *mut f64,
    buffer_len: usize,
) -> CwStatus {
    guard(|| {
        if result.is_null() || buffer.is_null() {
            return fail(CwStatus::NullArgument, "result or buffer is null");
        }
        let Some(view) = (*result).get(index) else {
            return fail(
                CwStatus::OutOfRange,
                format!("outcome index {index} out of range"),
            );
        };
        if buffer_len < view.mean_curve.len() {
            return fail(
                CwStatus::OutOfRange,
                format!(
                    "buffer holds {buffer_len} values but the curve has {}",
                    view.mean_curve.len()
                ),
            );
        }
        let out = std::slice::from_raw_parts_mut(buffer, view.mean_curve.len());
        out.copy_from_slice(&view.mean_curve);
        CwStatus::Ok
    })
}
