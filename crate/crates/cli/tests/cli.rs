use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mixnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixnorm")).args(args).output().expect("spawn mixnorm")
}

fn write_config(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn run_ok(args: &[&str]) -> String {
    let out = mixnorm(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&run_ok(args)).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn repo_config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).to_string_lossy().into_owned()
}

const F23: &str = r#"{
  "grid": { "axes": [ { "a": -50, "b": 50, "m": 1000 }, { "a": -50, "b": 50, "m": 1000 } ] },
  "p": [2, 3],
  "function": "1/((1+abs(y1))*sqrt(1+abs(y2)))"
}"#;

#[test]
fn norm_matches_the_closed_form_on_the_box() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "f23.json", F23);
    let report = json(&["norm", "--config", cfg.to_str().unwrap()]);
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["command"], "norm");
    assert_eq!(report["config_digest"].as_str().unwrap().len(), 64);
    let v = report["results"]["mixed_norm"].as_f64().unwrap();
    let r = 50.0f64;
    let exact = (2.0 * (1.0 - 1.0 / (1.0 + r))).sqrt() * (4.0 * (1.0 - (1.0 + r).powf(-0.5))).cbrt();
    assert!((v - exact).abs() / exact < 1e-3, "{v} vs {exact}");
    assert_eq!(report["results"]["nodes"], 1_000_000);
}

#[test]
fn parse_errors_exit_2_with_a_position() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.json", r#"{"p": [2], "function": "1 + * y1", "grid": {"axes": [{"a": 0, "b": 1, "m": 4}]}}"#);
    let out = mixnorm(&["norm", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1:5") && err.contains("offset 4"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_json_and_missing_files_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.json", r#"{"p": [2], "grid": "#);
    assert_eq!(mixnorm(&["norm", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(mixnorm(&["norm", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn node_budget_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "f23.json", F23);
    let out = mixnorm(&["norm", "--config", cfg.to_str().unwrap(), "--max-nodes", "1000"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("node budget"));
}

#[test]
fn subcommand_must_match_the_operator_kind() {
    let out = mixnorm(&["product", "--config", &repo_config("hardy_indicator.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hardy operator"));
}

#[test]
fn unwritable_output_exits_1() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("missing-dir").join("report.json");
    let out = mixnorm(&["hardy", "--config", &repo_config("hardy_indicator.json"), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn estimates_are_reproducible() {
    let cfg = repo_config("coupling_estimate.json");
    let run = |seed: &str| {
        let mut v = json(&["estimate", "--config", &cfg, "--seed", seed, "--budget", "120"]);
        v.as_object_mut().unwrap().remove("timings");
        v
    };
    let a = run("11");
    assert_eq!(a, run("11"));
    assert_eq!(a["seed"], 11);
    let lower = a["results"]["empirical_lower"].as_f64().unwrap();
    let formula = a["results"]["formula_value"].as_f64().unwrap();
    assert!(lower > 0.0 && lower <= formula * 1.01, "{lower} vs {formula}");
}

#[test]
fn report_goes_to_the_output_file() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("report.csv");
    let stdout = run_ok(&["hardy", "--config", &repo_config("hardy_indicator.json"), "--format", "csv", "--out", out_path.to_str().unwrap()]);
    assert!(stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let rows = csv_rows(&text);
    let ratio: f64 = rows.iter().find(|r| r[0] == "ratio").unwrap()[1].parse().unwrap();
    assert!((ratio - 2f64.sqrt()).abs() / 2f64.sqrt() < 0.01, "{ratio}");
}

#[test]
fn refined_hardy_indicator_settles_near_sqrt_2() {
    let text = run_ok(&["refine", "--config", &repo_config("hardy_indicator.json"), "--levels", "3", "--format", "csv"]);
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2][1], "800");
    let last: f64 = rows[2][2].parse().unwrap();
    assert!((last - 2f64.sqrt()).abs() / 2f64.sqrt() < 0.01, "{last}");
}

#[test]
fn refining_a_constant_leaves_the_norm_unchanged() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "one.json",
        r#"{"p": [3, 1.5], "function": "1", "grid": {"axes": [{"a": 0, "b": 1, "m": 10}, {"a": 0, "b": 1, "m": 7}]}}"#,
    );
    let report = json(&["refine", "--config", cfg.to_str().unwrap(), "--levels", "4"]);
    let rows = report["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3]["m"], serde_json::json!([80, 56]));
    for row in rows {
        assert!((row["value"].as_f64().unwrap() - 1.0).abs() < 1e-12, "{row}");
    }
}

#[test]
fn rotation_probe_grows_and_refine_rejects_one_level() {
    let cfg = repo_config("rotation_probe.json");
    let text = run_ok(&["probe", "--config", &cfg, "--format", "csv"]);
    let values: Vec<f64> = csv_rows(&text).iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(values.len(), 3);
    assert!(values.windows(2).all(|w| w[0] < w[1]), "{values:?}");
    assert!((values[0] - 2.19).abs() / 2.19 < 0.05 && (values[1] - 3.04).abs() / 3.04 < 0.05, "{values:?}");
    assert_eq!(mixnorm(&["refine", "--config", &cfg, "--levels", "1"]).status.code(), Some(2));
}

#[test]
fn every_shipped_config_runs() {
    for (command, file) in [
        ("norm", "f23_norm.json"),
        ("hardy", "hardy_indicator.json"),
        ("compose", "coupling_estimate.json"),
        ("estimate", "coupling_estimate.json"),
        ("product", "product.json"),
        ("steklov", "steklov.json"),
        ("probe", "rotation_probe.json"),
    ] {
        let report = json(&[command, "--config", &repo_config(file)]);
        assert_eq!(report["command"], command, "{file}");
    }
}

#[test]
fn verify_core_suite_passes() {
    let report = json(&["verify", "--suite", "core", "--seed", "42"]);
    let checks = report["results"]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 13);
    for c in checks {
        assert_eq!(c["passed"], true, "{c}");
    }
    assert_eq!(report["seed"], 42);
}
