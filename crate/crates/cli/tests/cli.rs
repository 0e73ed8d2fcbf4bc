use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cmbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmbp")).args(args).output().unwrap()
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn preset_config(dir: &TempDir, preset: &str, extra: &str) -> PathBuf {
    let body = format!(r#"{{"schema_version": 1, "model": {{"preset": {preset}}}{extra}}}"#);
    write_config(dir, "run.json", &body)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn classify_presets() {
    let dir = TempDir::new().unwrap();
    for preset in [r#"{"name": "uniform_migration"}"#, r#"{"name": "deterministic_ray"}"#] {
        let cfg = preset_config(&dir, preset, "");
        let o = cmbp(&["classify", "--config", s(&cfg)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let v = stdout_json(&o);
        assert_eq!(v["report"]["class"], "Critical", "{preset}");
        assert!((v["report"]["rho"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn classify_supercritical_migration() {
    let dir = TempDir::new().unwrap();
    let cfg = preset_config(&dir, r#"{"name": "uniform_migration", "q": 0.6}"#, "");
    let o = cmbp(&["classify", "--config", s(&cfg)]);
    assert!(o.status.success());
    assert_eq!(stdout_json(&o)["report"]["class"], "Supercritical");
}

#[test]
fn malformed_json_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.json", r#"{"schema_version": 1, "model": "#);
    let o = cmbp(&["classify", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse"));
}

#[test]
fn unknown_fields_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = preset_config(&dir, r#"{"name": "deterministic_ray"}"#, r#", "trajectory": 3"#);
    let o = cmbp(&["classify", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trajectory"));
    let bad_version = write_config(&dir, "v.json", r#"{"schema_version": 9, "model": {"preset": {"name": "deterministic_ray"}}}"#);
    assert_eq!(cmbp(&["classify", "--config", s(&bad_version)]).status.code(), Some(2));
}

#[test]
fn ray_simulation_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = preset_config(&dir, r#"{"name": "deterministic_ray"}"#, r#", "K": 3, "master_seed": 0"#);
    let o = cmbp(&["simulate", "--config", s(&cfg)]);
    assert!(o.status.success());
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "trajectory_id,k,Z_1,Z_2\n0,0,1,0\n0,1,2,0\n0,2,3,0\n0,3,4,0\n"
    );
}

#[test]
fn simulation_needs_a_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = preset_config(&dir, r#"{"name": "deterministic_ray"}"#, r#", "K": 3"#);
    let o = cmbp(&["simulate", "--config", s(&cfg)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    assert!(cmbp(&["simulate", "--config", s(&cfg), "--seed", "3"]).status.success());
}

#[test]
fn repeated_simulation_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = preset_config(
        &dir,
        r#"{"name": "two_sex_promiscuous"}"#,
        r#", "K": 40, "trajectories": 2, "master_seed": 11"#,
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(cmbp(&["simulate", "--config", s(&cfg), "--out", s(&a), "--threads", "1"]).status.success());
    assert!(cmbp(&["simulate", "--config", s(&cfg), "--out", s(&b), "--threads", "2"]).status.success());
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 1 + 2 * 41);
    assert!(!a.contains(&b'\r'));
}

#[test]
fn zero_offspring_rows_vanish() {
    let dir = TempDir::new().unwrap();
    let spec = r#"{
        "p": 2,
        "offspring": [
            {"kind": "deterministic", "params": {"value": [0, 0]}},
            {"kind": "deterministic", "params": {"value": [0, 0]}}
        ],
        "control": {"kind": "identity", "params": {"dim": 2}},
        "Lambda": [[1, 0], [0, 1]],
        "alpha": [0, 0],
        "z0": {"kind": "deterministic", "params": {"value": [3, 5]}}
    }"#;
    let cfg = write_config(
        &dir,
        "zero.json",
        &format!(r#"{{"schema_version": 1, "model": {{"spec": {spec}}}, "K": 4, "master_seed": 2}}"#),
    );
    let o = cmbp(&["simulate", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows[0], "0,0,3,5");
    for (k, row) in rows.iter().enumerate().skip(1) {
        assert_eq!(*row, format!("0,{k},0,0"));
    }
}

#[test]
fn limit_reports_gamma_parameters() {
    let dir = TempDir::new().unwrap();
    let cfg = preset_config(
        &dir,
        r#"{"name": "two_sex_promiscuous"}"#,
        r#", "T": 2.0, "t": 1.0, "dt": 0.01, "paths": 3, "master_seed": 5"#,
    );
    let csv = dir.path().join("sde.csv");
    let o = cmbp(&["limit", "--config", s(&cfg), "--out", s(&csv)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    // b = σ² = 2 at t = 1: shape 2b/σ² = 2, rate 2/(σ²t) = 1
    assert_eq!(v["marginal"]["kind"], "gamma");
    assert!((v["marginal"]["shape"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!((v["marginal"]["rate"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["degenerate"], false);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("path_id,j,t,X\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 201);
}

#[test]
fn limit_of_the_ray_is_a_line() {
    let dir = TempDir::new().unwrap();
    let cfg = preset_config(&dir, r#"{"name": "deterministic_ray"}"#, r#", "T": 1.0, "dt": 0.25, "master_seed": 0"#);
    let csv = dir.path().join("line.csv");
    let o = cmbp(&["limit", "--config", s(&cfg), "--out", s(&csv)]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["degenerate"], true);
    assert_eq!(v["marginal"]["kind"], "degenerate_line");
    assert_eq!(v["marginal"]["value"].as_f64().unwrap(), 1.0);
    let xs: Vec<f64> = std::fs::read_to_string(csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn limit_refuses_supercritical() {
    let dir = TempDir::new().unwrap();
    let cfg = preset_config(&dir, r#"{"name": "uniform_migration", "q": 0.6}"#, "");
    let o = cmbp(&["limit", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("critical"));
}

#[test]
fn verify_with_one_trajectory_is_insufficient() {
    let dir = TempDir::new().unwrap();
    let cfg = preset_config(&dir, r#"{"name": "two_sex_promiscuous"}"#, r#", "trajectories": 1, "master_seed": 0"#);
    let o = cmbp(&["verify", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let reports = stdout_json(&o);
    let reports = reports.as_array().unwrap();
    assert_eq!(reports[0]["check"], "classification");
    assert_eq!(reports[0]["pass"], true);
    let statistical: Vec<&Value> = reports.iter().filter(|r| r["check"] != "classification").collect();
    assert!(!statistical.is_empty());
    for r in statistical {
        assert_eq!(r["status"], "insufficient_samples", "{r}");
        assert_eq!(r["pass"], false);
    }
}

#[test]
fn verify_refuses_supercritical() {
    let dir = TempDir::new().unwrap();
    let cfg = preset_config(&dir, r#"{"name": "uniform_migration", "q": 0.6}"#, r#", "master_seed": 0"#);
    let o = cmbp(&["verify", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("precondition") && err.contains("Supercritical"), "{err}");
}

#[test]
fn verify_promiscuous_small_run() {
    let dir = TempDir::new().unwrap();
    let cfg = preset_config(
        &dir,
        r#"{"name": "two_sex_promiscuous"}"#,
        r#", "n": 200, "trajectories": 1000, "k_max": 400, "growth_trajectories": 200, "master_seed": 6"#,
    );
    let out = dir.path().join("suite.json");
    let o = cmbp(&["verify", "--config", s(&cfg), "--out", s(&out)]);
    let reports: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for r in reports.as_array().unwrap() {
        assert!(r["pass"].is_boolean() && r["status"].is_string(), "{r}");
        if r["check"] == "marginal_convergence" || r["check"] == "mean_identity" {
            assert_eq!(r["pass"], true, "{r}");
        }
    }
    let all_pass = reports.as_array().unwrap().iter().all(|r| r["pass"] == true);
    assert_eq!(o.status.success(), all_pass);
}

#[test]
fn preset_list_round_trips() {
    let o = cmbp(&["preset", "list"]);
    assert!(o.status.success());
    let presets = stdout_json(&o);
    let names: Vec<&str> = presets.as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        [
            "deterministic_ray",
            "uniform_migration",
            "mbpi_embedding",
            "mbpi_migration_repr",
            "two_sex_promiscuous",
            "two_sex_selffert"
        ]
    );
    let dir = TempDir::new().unwrap();
    for p in presets.as_array().unwrap() {
        let cfg = preset_config(&dir, &p.to_string(), "");
        let o = cmbp(&["classify", "--config", s(&cfg)]);
        assert!(o.status.success(), "{p}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout_json(&o)["report"]["class"], "Critical");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(cmbp(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cmbp(&["classify"]).status.code(), Some(2));
    assert_eq!(cmbp(&["simulate", "--config", "x", "--threads", "0"]).status.code(), Some(2));
}
