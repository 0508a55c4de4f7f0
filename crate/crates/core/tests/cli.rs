//! End-to-end tests of the `cwoful` binary: exit codes, file contracts,
//! and the output layout.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cwoful"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const MINIMAL: &str = r#"
[experiment]
name = "mini"
horizon = 100
seeds = [0]

[instance]
dim = 2
theta_star = [0.5, 0.1]
decision_set = { kind = "basis" }
noise = "gaussian"

[instance.bounds]
action_norm = 1.0
param_norm = 1.0
noise_scale = 1.0

[[policy]]
kind = "oful"
beta = { mode = "known-c", c = 0.0 }
delta = 0.05
"#;

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_minimal_config_writes_one_rounds_csv_with_100_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "mini.toml", MINIMAL);
    let out = bin()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));

    let run_dir = tmp.path().join("out").join("mini");
    let rounds: Vec<_> = std::fs::read_dir(&run_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.file_name()
                .unwrap()
                .to_string_lossy()
                .starts_with("rounds_")
        })
        .collect();
    assert_eq!(rounds.len(), 1);
    let text = std::fs::read_to_string(&rounds[0]).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "k,action_index,weight,bonus,clean_reward,c_k,observed_reward,instant_regret,cum_regret,est_error,confidence_ok"
    );
    assert_eq!(lines.count(), 100);
    assert!(run_dir.join("metadata.toml").exists());
    assert!(!run_dir.join(".incomplete").exists());
}

#[test]
fn invalid_delta_fails_with_named_field_and_config_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "bad.toml",
        &MINIMAL.replace("delta = 0.05", "delta = 1.5"),
    );
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("delta"), "{}", stderr(&out));
}

#[test]
fn toml_syntax_errors_carry_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "broken.toml",
        &MINIMAL.replace("noise = \"gaussian\"", "noise = gaussian"),
    );
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));
}

#[test]
fn rerun_produces_byte_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "mini.toml", MINIMAL);
    let out_dir = tmp.path().join("out");
    for _ in 0..2 {
        let out = bin()
            .arg("run")
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let first: Vec<u8> =
        std::fs::read(out_dir.join("mini").join("rounds_oful_d2_K100_C0_s0.csv")).unwrap();
    let out = bin()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let second =
        std::fs::read(out_dir.join("mini").join("rounds_oful_d2_K100_C0_s0.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn check_passes_on_a_clean_run_and_reports_margins() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "mini.toml", MINIMAL);
    let out = bin()
        .arg("check")
        .arg(&config)
        .arg("--seeds")
        .arg("0:4")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("potential inequality"), "{text}");
    assert!(text.contains("vacuous"), "{text}");
    assert!(text.contains("confidence violations"), "{text}");
    assert!(text.contains("check: PASS"), "{text}");
    // check never writes run outputs.
    assert!(!tmp.path().join("cwoful-out").exists());
}

#[test]
fn seeds_override_accepts_lists_and_ranges() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "mini.toml", MINIMAL);
    let out_dir = tmp.path().join("out");
    let out = bin()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .arg("--seeds")
        .arg("4,7")
        .output()
        .unwrap();
    assert!(out.status.success());
    let dir = out_dir.join("mini");
    assert!(dir.join("rounds_oful_d2_K100_C0_s4.csv").exists());
    assert!(dir.join("rounds_oful_d2_K100_C0_s7.csv").exists());

    let out = bin()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .arg("--seeds")
        .arg("10:3")
        .output()
        .unwrap();
    assert!(out.status.success());
    for seed in 10..13 {
        assert!(dir.join(format!("rounds_oful_d2_K100_C0_s{seed}.csv")).exists());
    }
}

#[test]
fn output_root_env_var_is_honored() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "mini.toml", MINIMAL);
    let env_root = tmp.path().join("from-env");
    let out = bin()
        .arg("run")
        .arg(&config)
        .env("CWOFUL_OUT", &env_root)
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(env_root.join("mini").join("metadata.toml").exists());
}

#[test]
fn lowerbound_echoes_the_pair_and_asserts_indistinguishability() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["lowerbound", "--d", "2", "--budget", "2", "--policy", "oful", "--K", "500"])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("theta0 = (0.25, 0.125)"), "{text}");
    assert!(text.contains("theta1 = (0.25, 0.375)"), "{text}");
    assert!(text.contains("indistinguishability: PASS"), "{text}");
    assert!(tmp.path().join("lowerbound_oful_d2_K500.csv").exists());
}

#[test]
fn lowerbound_zero_budget_diverges_at_first_target_pull() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["lowerbound", "--d", "2", "--budget", "0", "--policy", "oful", "--K", "300"])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(tmp.path().join("lowerbound_oful_d2_K300.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    // action divergence recorded, zero realized corruption, prefix holds.
    assert!(!fields[3].is_empty(), "{row}");
    let realized: f64 = fields[5].parse().unwrap();
    assert_eq!(realized, 0.0);
    assert_eq!(fields[7], "1");
}

#[test]
fn lowerbound_rejects_dimension_one() {
    let out = bin()
        .args(["lowerbound", "--d", "1", "--budget", "2", "--policy", "oful", "--K", "100"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("dimension"), "{}", stderr(&out));
}
