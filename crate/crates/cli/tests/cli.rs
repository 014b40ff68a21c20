use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const STABLE_HALF: &str = r#"{"variant": "stable", "params": {"alpha": 0.5}}"#;

fn timechange(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timechange")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn run_config(dir: &Path, body: &str) -> Output {
    let config = write_config(dir, body);
    let out = dir.join("out");
    timechange(&["run", "--config", &config, "--out", out.to_str().unwrap()])
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn pass_column(path: &Path) -> usize {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().position(|h| h == "pass").unwrap()
}

#[test]
fn density_suite_for_stable_half_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"kernels": [{STABLE_HALF}], "t_grid": {{"lo": 0.5, "hi": 2, "points": 16}}, "suites": ["density"]}}"#
    );
    let out = run_config(dir.path(), &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let density = std::fs::read_to_string(dir.path().join("out/density.csv")).unwrap();
    assert!(density.lines().count() > 16 * 51);
    let s = summary(dir.path());
    assert_eq!(s["status"], "pass");
    assert_eq!(s["failed"], 0);
    let checks = csv_rows(&dir.path().join("out/density_checks.csv"));
    assert!(checks.iter().any(|r| &r[1] == "closed_form"));
    assert_eq!(s["passed"].as_u64().unwrap() as usize, checks.len());
}

#[test]
fn empty_suites_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"kernels": [{STABLE_HALF}], "t_grid": {{"lo": 0.5, "hi": 2, "points": 16}}, "suites": []}}"#);
    let out = run_config(dir.path(), &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("suites must be non-empty"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn malformed_config_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), "{\n  \"kernels\": [\n    {\"variant\": }\n  ]\n}");
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("config.json:3:"), "{stderr}");
}

#[test]
fn verify_row_for_stable_exp_decay_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "kernels": [{"variant": "stable", "params": {"alpha": 0.6}}],
        "models": [{"variant": "exp_decay", "params": {"gamma": 1, "c": 1}}],
        "t_grid": {"lo": 1, "hi": 100, "points": 16},
        "suites": ["asymptotics"]
    }"#;
    let config = write_config(dir.path(), cfg);
    let out_dir = dir.path().join("out");
    let out = timechange(&["verify", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let path = out_dir.join("verify.csv");
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][pass_column(&path)], "true");
}

#[test]
fn unclassifiable_kernel_is_skipped_in_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "kernels": [{"variant": "gamma", "params": {"a": 1, "b": 1}}],
        "models": [{"variant": "exp_decay", "params": {"gamma": 1, "c": 1}}],
        "t_grid": {"lo": 1, "hi": 10, "points": 16},
        "suites": ["asymptotics"]
    }"#;
    let out = run_config(dir.path(), cfg);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path());
    assert_eq!(s["skipped"], 1);
    let path = dir.path().join("out/verify.csv");
    assert_eq!(&csv_rows(&path)[0][pass_column(&path)], "skipped");
}

#[test]
fn failing_check_exits_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    // Gaver–Stehfest at low order cannot meet the closed-form tolerance.
    let cfg = format!(
        r#"{{"kernels": [{STABLE_HALF}], "t_grid": {{"lo": 0.5, "hi": 2, "points": 16}},
            "inversion": {{"method": "gaver_stehfest", "order": 8}}, "suites": ["density"]}}"#
    );
    let out = run_config(dir.path(), &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(summary(dir.path())["status"], "fail");
}

#[test]
fn summary_counts_match_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "kernels": [
            {"variant": "stable", "params": {"alpha": 0.5}},
            {"variant": "distributed_order", "params": {"mu": {"form": "constant", "value": 1}}}
        ],
        "models": [{"variant": "exp_decay", "params": {"gamma": 1, "c": 1}}],
        "t_grid": {"lo": 0.1, "hi": 10, "points": 16},
        "mc": {"dt": 0.001, "horizon_s": 50, "seed": 3, "n_paths": 5000},
        "suites": ["subordinate", "mc", "admissibility"]
    }"#;
    let out = run_config(dir.path(), cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(dir.path());
    let (mut passed, mut skipped) = (0, 0);
    for name in ["subordinate.csv", "mc.csv", "admissibility.csv"] {
        let path = dir.path().join("out").join(name);
        let col = pass_column(&path);
        for row in csv_rows(&path) {
            match &row[col] {
                "true" => passed += 1,
                "skipped" => skipped += 1,
                other => panic!("unexpected pass value {other} in {name}"),
            }
        }
    }
    assert_eq!(s["passed"], passed);
    assert_eq!(s["skipped"], skipped);
    assert!(skipped >= 1, "distributed-order kernel has no sampler");
    assert!(dir.path().join("out/samples_0_0.csv").exists());
    assert!(dir.path().join("out/samples_0_0.json").exists());
}

#[test]
fn seed_flag_changes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"kernels": [{STABLE_HALF}], "t_grid": {{"lo": 0.5, "hi": 2, "points": 16}},
            "mc": {{"dt": 0.001, "horizon_s": 50, "seed": 1, "n_paths": 2000}}, "suites": ["mc"]}}"#
    );
    let config = write_config(dir.path(), &cfg);
    let read = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let status = timechange(&["simulate", "--config", &config, "--out", out.to_str().unwrap(), "--seed", seed]);
        assert_eq!(status.status.code(), Some(0));
        std::fs::read(out.join("samples_0_0.csv")).unwrap()
    };
    assert_eq!(read("a", "5"), read("b", "5"));
    assert_ne!(read("a", "5"), read("c", "6"));
}

#[test]
fn info_reports_class_and_admissibility() {
    let out = timechange(&["info", r#"{"variant": "stable", "params": {"alpha": 0.6}}"#]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("class C1 θ=0.6; admissible: yes"));

    let out = timechange(&["info", r#"{"variant": "gamma", "params": {"a": 1, "b": 1}}"#]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("class: outside C1/C2/C3"));

    let out = timechange(&["info", r#"{"variant": "stable", "params": {"alpha": "#]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn info_reads_kernel_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    std::fs::write(&path, STABLE_HALF).unwrap();
    let out = timechange(&["info", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("class C1 θ=0.5"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(timechange(&["frobnicate"]).status.code(), Some(2));
}
