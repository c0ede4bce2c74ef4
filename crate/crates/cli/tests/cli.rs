//! End-to-end tests driving the compiled binary.

// Reference constants keep every digit of the derivation that produced them.
#![allow(clippy::excessive_precision)]

use std::process::{Command, Output};

use herald_core::{survival_probability, SystemParams};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qutrit-herald"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn qutrit-herald")
}

fn stdout_of(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process terminated by signal")
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|f| f.parse::<f64>().expect("numeric field"))
                .collect()
        })
        .collect()
}

fn json_value(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&stdout_of(args)).expect("valid json")
}

#[test]
fn canonical_cascade_heralds_the_target_state() {
    let v = json_value(&["cascade", "--format", "json"]);
    let prob = v["data"]["probability"].as_f64().unwrap();
    let fid = v["data"]["fidelity"].as_f64().unwrap();
    assert!((prob - 1.0 / 12.0).abs() < 1e-12);
    assert!((fid - 1.0).abs() < 1e-12);
    assert_eq!(v["data"]["sequence"].as_array().unwrap().len(), 4);
}

#[test]
fn same_seed_gives_byte_identical_trajectories() {
    let a = stdout_of(&["trajectories", "--n-traj", "200", "--seed", "9"]);
    let b = stdout_of(&["trajectories", "--n-traj", "200", "--seed", "9"]);
    assert_eq!(a, b);
    let c = stdout_of(&["trajectories", "--n-traj", "200", "--seed", "10"]);
    assert_ne!(a, c);
}

#[test]
fn empty_grid_is_a_usage_error() {
    let out = run(&["sweep", "--grid", "0:0.5:0"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn malformed_grid_is_a_usage_error() {
    let out = run(&["sweep", "--grid", "0:0.5"]);
    assert_eq!(exit_code(&out), 2);
    let out = run(&["sweep", "--grid", "0:end:5"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn unknown_detector_is_a_usage_error() {
    let out = run(&["cascade", "--sequence", "Da_F,Bogus,Da_S,Db_S"]);
    assert_eq!(exit_code(&out), 2);
    let msg = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(msg.contains("Bogus"));
}

#[test]
fn overdamped_parameters_reject_the_optimal_window() {
    for sub in ["sweep", "trajectories", "fidelity-scan"] {
        let out = run(&[sub, "--lambda-l", "0.1", "--lambda-r", "0.1"]);
        assert_eq!(exit_code(&out), 1, "{sub} should fail with exit 1");
        let msg = String::from_utf8_lossy(&out.stderr).to_string();
        assert!(msg.contains("overdamped"), "{sub}: {msg}");
    }
    let out = run(&[
        "sweep",
        "--lambda-l",
        "0.1",
        "--lambda-r",
        "0.1",
        "--tau",
        "0.5",
        "--grid",
        "0:1:5",
    ]);
    assert_eq!(exit_code(&out), 0, "explicit window must still work");
}

#[test]
fn stronger_coupling_peaks_higher() {
    let peak = |lambda: &str| -> f64 {
        let csv = stdout_of(&["sweep", "--lambda-l", lambda, "--lambda-r", lambda]);
        data_rows(&csv)
            .iter()
            .map(|r| r[1])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let p10 = peak("10");
    let p15 = peak("15");
    assert!(
        p15 > p10,
        "15 kappa peak {p15} should beat 10 kappa peak {p10}"
    );
    // The grid maximum sits within one step of the true peak, so it can sag
    // below the closed-form value by O(step^2) but never rise above it.
    assert!(p10 <= 0.049397221298111567 + 1e-12);
    assert!((p10 - 0.049397221298111567).abs() < 1e-5);
    assert!(p15 <= 0.058672901488096728 + 1e-12);
    assert!((p15 - 0.058672901488096728).abs() < 1e-5);
}

#[test]
fn json_config_echo_is_a_fixed_point() {
    let first = stdout_of(&[
        "sweep",
        "--format",
        "json",
        "--lambda-l",
        "12",
        "--theta",
        "0.5",
        "--tau",
        "0.1",
        "--grid",
        "0:0.4:9",
        "--seed",
        "7",
    ]);
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("echo.json");
    std::fs::write(&path, serde_json::to_string(&v["config"]).unwrap()).unwrap();
    let second = stdout_of(&[
        "--config",
        path.to_str().unwrap(),
        "sweep",
        "--format",
        "json",
    ]);
    assert_eq!(first, second);
}

#[test]
fn amplitudes_start_from_the_excited_state() {
    let csv = stdout_of(&["amplitudes", "--grid", "0:0.5:11"]);
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0], vec![0.0, 1.0, 0.0, 0.0, 1.0]);
}

#[test]
fn amplitude_survival_column_matches_the_library() {
    let p = SystemParams::balanced(10.0, 0.1, 1.0).unwrap();
    let csv = stdout_of(&["amplitudes", "--grid", "0:1:21"]);
    for row in data_rows(&csv) {
        let expected = survival_probability(&p, row[0]).unwrap();
        assert!((row[4] - expected).abs() < 1e-12, "t={}", row[0]);
        assert!((row[1] + row[2] + row[3] - (row[4])).abs() < 1e-10 * row[4].max(1.0));
    }
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let on_stdout = stdout_of(&["outcomes"]);
    let out = run(&["outcomes", "--output", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(on_stdout, written);
}

#[test]
fn output_into_a_missing_directory_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("no/such/dir/out.csv");
    let out = run(&["outcomes", "--output", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn outcome_distribution_sums_to_one() {
    let csv = stdout_of(&["outcomes"]);
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 35);
    let total: f64 = rows.iter().map(|r| r[4]).sum();
    assert!((total - 1.0).abs() < 1e-10);
    let quad = rows
        .iter()
        .find(|r| r[0] == 4.0 && r[1] == 0.0 && r[2] == 0.0 && r[3] == 0.0)
        .expect("pattern 4,0,0,0 present");
    assert!((quad[4] - 1.0 / 96.0).abs() < 1e-12);
}

#[test]
fn ratio_scan_hits_the_known_point() {
    let csv = stdout_of(&["fidelity-scan", "--axis", "ratio", "--grid", "1.1:1.1:1"]);
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 1);
    assert!((rows[0][1] - 0.976556893389681844).abs() < 1e-12);
}

#[test]
fn theta_scan_defaults_to_the_angle_axis() {
    let v = json_value(&["fidelity-scan", "--format", "json", "--grid", "0:1.5:4"]);
    assert_eq!(v["config"]["axis"], serde_json::json!("theta"));
    assert_eq!(v["data"]["axis"], serde_json::json!("theta"));
}

#[test]
fn comments_carry_the_canonical_angle() {
    let csv = stdout_of(&["sweep", "--grid", "0:0.3:4"]);
    assert!(csv.contains("# theta=0.477658309062255\n"));
    assert!(csv.contains("# lambda_l=10\n"));
    assert!(csv.contains("# seed=0\n"));
}

#[test]
fn impossible_herald_reports_zero_probability() {
    let v = json_value(&[
        "cascade",
        "--lambda-r",
        "0",
        "--theta",
        "0",
        "--format",
        "json",
    ]);
    assert_eq!(v["data"]["probability"].as_f64().unwrap(), 0.0);
    assert!(v["data"]["decoded"].is_null());
    assert!(v["data"]["fidelity"].is_null());
}

#[test]
fn config_file_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(
        &path,
        r#"{"params": {"lambda_l": 3.0, "lambda_r": 3.0, "kappa": 1.0, "gamma_l": 0.0, "gamma_r": 0.0}, "seed": 4}"#,
    )
    .unwrap();
    let csv = stdout_of(&[
        "--config",
        path.to_str().unwrap(),
        "--lambda-l",
        "5",
        "sweep",
        "--grid",
        "0:0.3:4",
    ]);
    assert!(csv.contains("# lambda_l=5\n"), "flag should win over file");
    assert!(
        csv.contains("# lambda_r=3\n"),
        "file should win over default"
    );
    assert!(csv.contains("# seed=4\n"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"seed": 4, "speling": 1}"#).unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "outcomes"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let out = run(&["--config", "/definitely/not/here.json", "outcomes"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn repeated_detector_sequence_uses_the_counting_weight() {
    let v = json_value(&[
        "cascade",
        "--sequence",
        "Da_F,Da_F,Da_F,Da_F",
        "--format",
        "json",
    ]);
    let prob = v["data"]["probability"].as_f64().unwrap();
    assert!((prob - 1.0 / 96.0).abs() < 1e-12);
    assert!(v["data"]["intermediates"].as_array().unwrap().is_empty());
}

#[test]
fn help_mentions_every_subcommand() {
    let out = run(&["--help"]);
    assert_eq!(exit_code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in [
        "amplitudes",
        "trajectories",
        "cascade",
        "outcomes",
        "sweep",
        "fidelity-scan",
    ] {
        assert!(text.contains(sub), "help should mention {sub}");
    }
}
