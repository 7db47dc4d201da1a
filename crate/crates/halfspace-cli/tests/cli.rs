use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfspace"))
        .args(args)
        .arg("--output")
        .arg(dir)
        .env_remove("HALFSPACE_THREADS")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path, name: &str) -> Value {
    let text = fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn roots_writes_a_versioned_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["roots", "--lambda", "4,2", "--xi", "1.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = report(dir.path(), "roots");
    assert_eq!(doc["command"], "roots");
    assert!(doc["schema_version"].is_string() || doc["schema_version"].is_number());
    assert_eq!(doc["config"]["lambda"], serde_json::json!([4.0, 2.0]));
    assert_eq!(doc["report"]["sector"]["inside"], true);
    assert_eq!(doc["report"]["z"].as_array().unwrap().len(), 2);
}

#[test]
fn unknown_config_key_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "params": { "a": 1.0, "bta": 2.0 } }"#);
    let out = run(dir.path(), &["roots", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("params") && err.contains("bta"), "{err}");
}

#[test]
fn invalid_parameters_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["roots", "--a", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["roots", "--xi", "1,2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["roots", "--lambda", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_assertion_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "residual": { "samples": 5, "tolerance": 1e-30 } }"#);
    let out = run(dir.path(), &["verify", "residual", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("assertion failed"));
}

#[test]
fn residual_suite_passes_on_defaults_and_is_deterministic() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let out = run(first.path(), &["verify", "residual", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    run(second.path(), &["verify", "residual", "--seed", "7", "--threads", "1"]);
    let (a, b) = (report(first.path(), "verify_residual"), report(second.path(), "verify_residual"));
    assert_eq!(a["report"], b["report"]);
}

#[test]
fn flags_override_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "params": { "beta": 0.5 }, "lambda": [3.0, 1.0] }"#);
    let out = run(dir.path(), &["roots", "--config", &cfg, "--beta", "1.25"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = report(dir.path(), "roots");
    assert_eq!(doc["config"]["params"]["beta"], 1.25);
    assert_eq!(doc["config"]["lambda"], serde_json::json!([3.0, 1.0]));
}
