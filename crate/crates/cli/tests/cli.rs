use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dtcbf"));
    c.env("DTCBF_LOG_LEVEL", "quiet");
    c
}

fn config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn sim_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "acc.json", r#"{"model": {"kind": "acc"}, "horizon": 50, "seeds": [0, 1]}"#);
    let out = dir.path().join("out");
    let o = run(&["sim", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["raCBF_adaptive_nominal_seed3.csv", "raCBF_adaptive_nominal_seed3.json", "raCBF_adaptive_nominal.svg"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let csv = fs::read_to_string(out.join("raCBF_adaptive_nominal_seed3.csv")).unwrap();
    assert_eq!(csv.lines().count(), 52);
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["min_b"].as_f64().unwrap() >= 0.0);
}

#[test]
fn infeasible_filter_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.json", r#"{"model": {"kind": "acc"}, "x0": [30.0, 40.0], "horizon": 20, "seeds": [0]}"#);
    let o = run(&["sim", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
}

#[test]
fn unsafe_start_recovery_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "c.json",
        r#"{"model": {"kind": "acc", "u_max_g": 5.0}, "x0": [30.0, 40.0], "seeds": [0]}"#,
    );
    let o = run(&["sim", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.json", r#"{"horizon": 10, "no_such_field": 1}"#);
    let o = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let missing = run(&["estimate", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn compare_reports_all_controllers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.json", r#"{"horizon": 60, "seeds": [0, 1, 2]}"#);
    let o = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = rep["controllers"].as_array().unwrap().iter().map(|c| c["controller"].as_str().unwrap()).collect();
    assert_eq!(names, ["raCBF_adaptive_nominal", "rCBF_fixed_nominal", "nominal_only"]);
}

#[test]
fn estimate_prints_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.json", r#"{"seeds": [0, 1]}"#);
    let o = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["all_consistent"], true);
    assert!(rep["mean_beta1_ratio"].as_f64().unwrap() < 0.5);
}

#[test]
fn verify_oracles_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let o = run(&["verify", "--suite", "oracles", "--report", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(rep[0]["passed"], true);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["verify", "--suite", "nope"]).status.code(), Some(1));
    assert_eq!(run(&["sim"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_log_level_warns() {
    let o = bin()
        .env("DTCBF_LOG_LEVEL", "loud")
        .args(["estimate", "--config", "/nonexistent.json"])
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&o.stderr).contains("DTCBF_LOG_LEVEL=loud"));
}
