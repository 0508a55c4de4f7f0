//! Exercises the C ABI exactly as a foreign caller would: through the
//! exported extern "C" functions, raw pointers and status codes.

use std::ffi::{CStr, CString};
use std::ptr;

use cwoful_ffi::*;

const CONFIG: &str = r#"
[experiment]
name = "ffi-demo"
horizon = 120
seeds = [0, 1, 2]

[instance]
dim = 2
theta_star = [0.5, 0.1]
decision_set = { kind = "basis" }
noise = "gaussian"

[instance.bounds]
action_norm = 1.0
param_norm = 1.0
noise_scale = 0.5

[adversary]
strategy = "suppress"
shift = 0.25
budget = 2.0

[[policy]]
name = "cw"
kind = "cw-oful"
beta = { mode = "known-c", c = "adversary-budget" }
delta = 0.05
"#;

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(cw_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

#[test]
fn version_is_a_nul_terminated_semver() {
    let version = unsafe { CStr::from_ptr(cw_version()) };
    let text = version.to_str().unwrap();
    assert!(text.split('.').count() >= 3, "{text}");
}

#[test]
fn null_and_bad_inputs_report_status_codes() {
    unsafe {
        let mut exp: *mut CwExperiment = ptr::null_mut();
        assert_eq!(
            cw_experiment_from_toml(ptr::null(), &mut exp),
            CwStatus::NullArgument
        );

        let bad = CString::new("delta = ").unwrap();
        assert_eq!(
            cw_experiment_from_toml(bad.as_ptr(), &mut exp),
            CwStatus::InvalidConfig
        );
        assert!(last_error().contains("line"), "{}", last_error());

        let invalid = CString::new(CONFIG.replace("delta = 0.05", "delta = 1.5")).unwrap();
        assert_eq!(
            cw_experiment_from_toml(invalid.as_ptr(), &mut exp),
            CwStatus::InvalidConfig
        );
        assert!(last_error().contains("delta"), "{}", last_error());
    }
}

#[test]
fn full_run_through_the_c_surface() {
    unsafe {
        let text = CString::new(CONFIG).unwrap();
        let mut exp: *mut CwExperiment = ptr::null_mut();
        assert_eq!(cw_experiment_from_toml(text.as_ptr(), &mut exp), CwStatus::Ok);
        assert!(!exp.is_null());

        let seeds = [7u64, 8, 9, 10];
        assert_eq!(
            cw_experiment_set_seeds(exp, seeds.as_ptr(), seeds.len()),
            CwStatus::Ok
        );

        let mut result: *mut CwResult = ptr::null_mut();
        assert_eq!(cw_experiment_run(exp, &mut result), CwStatus::Ok);
        assert!(!result.is_null());

        let mut count = 0usize;
        assert_eq!(cw_result_outcome_count(result, &mut count), CwStatus::Ok);
        assert_eq!(count, 1);

        let mut name: *const std::ffi::c_char = ptr::null();
        assert_eq!(cw_result_policy_name(result, 0, &mut name), CwStatus::Ok);
        assert_eq!(CStr::from_ptr(name).to_str().unwrap(), "cw");

        let mut label: *const std::ffi::c_char = ptr::null();
        assert_eq!(cw_result_cell_label(result, 0, &mut label), CwStatus::Ok);
        assert_eq!(CStr::from_ptr(label).to_str().unwrap(), "d2_K120_C2");

        let mut horizon = 0usize;
        assert_eq!(cw_result_horizon(result, 0, &mut horizon), CwStatus::Ok);
        assert_eq!(horizon, 120);

        let mut beta = 0.0f64;
        assert_eq!(cw_result_beta(result, 0, &mut beta), CwStatus::Ok);
        assert!(beta > 0.0);

        let (mut mean, mut std) = (0.0f64, 0.0f64);
        assert_eq!(
            cw_result_final_regret(result, 0, &mut mean, &mut std),
            CwStatus::Ok
        );
        assert!(mean >= 0.0 && std >= 0.0);

        let mut ok = false;
        assert_eq!(cw_result_hard_checks_ok(result, 0, &mut ok), CwStatus::Ok);
        assert!(ok);

        let mut rate = 1.0f64;
        assert_eq!(
            cw_result_confidence_violation_rate(result, 0, &mut rate),
            CwStatus::Ok
        );
        assert!((0.0..=1.0).contains(&rate));

        let mut curve = vec![0.0f64; horizon];
        assert_eq!(
            cw_result_mean_regret_curve(result, 0, curve.as_mut_ptr(), curve.len()),
            CwStatus::Ok
        );
        assert!((curve[horizon - 1] - mean).abs() < 1e-12);
        // Cumulative regret is nondecreasing.
        assert!(curve.windows(2).all(|w| w[1] >= w[0] - 1e-12));

        // Too-small buffer and bad index are range errors, not UB.
        assert_eq!(
            cw_result_mean_regret_curve(result, 0, curve.as_mut_ptr(), horizon - 1),
            CwStatus::OutOfRange
        );
        let mut unused = 0usize;
        assert_eq!(
            cw_result_horizon(result, 5, &mut unused),
            CwStatus::OutOfRange
        );

        cw_result_free(result);
        cw_experiment_free(exp);
        // Frees tolerate null.
        cw_result_free(ptr::null_mut());
        cw_experiment_free(ptr::null_mut());
    }
}

#[test]
fn run_to_dir_writes_the_cli_layout() {
    unsafe {
        let tmp = tempfile::tempdir().unwrap();
        let text = CString::new(CONFIG).unwrap();
        let mut exp: *mut CwExperiment = ptr::null_mut();
        assert_eq!(cw_experiment_from_toml(text.as_ptr(), &mut exp), CwStatus::Ok);

        let root = CString::new(tmp.path().to_str().unwrap()).unwrap();
        let mut result: *mut CwResult = ptr::null_mut();
        assert_eq!(
            cw_experiment_run_to_dir(exp, root.as_ptr(), &mut result),
            CwStatus::Ok
        );
        let run_dir = tmp.path().join("ffi-demo");
        assert!(run_dir.join("metadata.toml").exists());
        assert!(run_dir.join("rounds_cw_d2_K120_C2_s0.csv").exists());
        assert!(run_dir.join("agg_cw_d2_K120_C2.csv").exists());

        cw_result_free(result);
        cw_experiment_free(exp);
    }
}
