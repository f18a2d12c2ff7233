use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lqrk"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn diagnostics(out: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(format!("{name}.json"))).unwrap()).unwrap()
}

#[test]
fn riccati_reports_tanh() {
    let out = tempfile::tempdir().unwrap();
    let result = run(&scenario("scalar-riccati.json"), out.path(), &[]);
    assert!(result.status.success());
    let d = diagnostics(out.path(), "scalar-riccati");
    let p0 = d["results"]["P_t0"][0][0].as_f64().unwrap();
    assert!((p0 - 0.76159).abs() < 1e-5, "{p0}");
    let csv = std::fs::read_to_string(out.path().join("scalar-riccati.csv")).unwrap();
    assert!(csv.starts_with("t,P_1_1\n"));
    assert_eq!(csv.lines().count(), 202);
}

#[test]
fn lqr_compare_gap_is_small() {
    let out = tempfile::tempdir().unwrap();
    assert!(run(&scenario("scalar-lqr-compare.json"), out.path(), &[]).status.success());
    let d = diagnostics(out.path(), "scalar-lqr-compare");
    assert!(d["results"]["gap"].as_f64().unwrap() <= 1e-3);
    let csv = std::fs::read_to_string(out.path().join("scalar-lqr-compare.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,y_1,u_1"));
}

#[test]
fn verify_passes_on_seed_42() {
    let out = tempfile::tempdir().unwrap();
    let result = run(&scenario("random-verify.json"), out.path(), &[]);
    assert_eq!(result.status.code(), Some(0));
    let d = diagnostics(out.path(), "random-verify");
    let blocks = d["invariants"].as_array().unwrap();
    assert!(!blocks.is_empty());
    assert!(blocks.iter().all(|b| b["pass"] == Value::Bool(true)));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        r#"{ "problem": { "kind": "scalar-lq" }, "task": { "kind": "riccati" }, "foo": 1 }"#,
    );
    let result = run(&config, dir.path(), &[]);
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("foo"));
}

#[test]
fn interp_without_targets_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "interp.json",
        r#"{ "problem": { "kind": "scalar-lq" }, "task": { "kind": "interp", "points": [0.5] } }"#,
    );
    assert_eq!(run(&config, dir.path(), &[]).status.code(), Some(1));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&dir.path().join("absent.json"), dir.path(), &[]).status.code(), Some(1));
}

#[test]
fn failing_invariant_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "strict.json",
        r#"{ "problem": { "kind": "scalar-lq" }, "task": { "kind": "lqr-compare", "y0": [1.0] },
             "tolerances": { "lqr_gap": 1e-12 } }"#,
    );
    assert_eq!(run(&config, dir.path(), &[]).status.code(), Some(3));
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [&a, &b] {
        assert!(run(&scenario("random-mayer-logcosh.json"), out.path(), &["--seed", "11"]).status.success());
    }
    for file in ["random-mayer-logcosh.json", "random-mayer-logcosh.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
}

#[test]
fn steps_override_changes_the_grid() {
    let out = tempfile::tempdir().unwrap();
    assert!(run(&scenario("scalar-riccati.json"), out.path(), &["--steps", "50"]).status.success());
    let d = diagnostics(out.path(), "scalar-riccati");
    assert_eq!(d["grid"]["steps"].as_u64(), Some(50));
}

#[test]
fn verify_command_writes_report() {
    let out = tempfile::tempdir().unwrap();
    let result = bin()
        .args(["verify", "--seed", "3", "--out-dir"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(0), "{}", String::from_utf8_lossy(&result.stdout));
    assert!(out.path().join("verify.json").exists());
}
