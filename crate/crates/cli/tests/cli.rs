use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_spinsol");

fn run_in(dir: &Path, args: &[&str], config: &str) -> Output {
    std::fs::write(dir.join("config.json"), config).unwrap();
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .args(["--config", "config.json", "--out", "out"])
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn one_soliton_velocity_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["construct"], r#"{"poles": [[0.4, -0.625]], "bras": [[[1, 0], [0.5, -0.5]]]}"#);
    assert_eq!(out.status.code(), Some(0));
    let rep = json(&dir.path().join("out/run.report.json"));
    let v = num(&rep["velocities"][0][0]);
    assert!((v - 1.6).abs() < 1e-12, "{v}");
    assert!(num(&rep["velocities"][0][1]).abs() < 1e-12);
    assert_eq!(rep["passed"], Value::Bool(true));
}

#[test]
fn coincident_poles_are_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"poles": [[0.0, -1.0], [0.0, -1.0]], "bras": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}"#;
    let out = run_in(dir.path(), &["construct"], cfg);
    assert_eq!(out.status.code(), Some(15));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("\"kind\":\"degenerate-configuration\""), "{stderr}");
    let manifest = json(&dir.path().join("out/manifest.json"));
    assert_eq!(manifest["status"], "error");
    assert_eq!(manifest["error"]["kind"], "degenerate-configuration");
}

#[test]
fn seeded_runs_are_byte_identical() {
    let cfg = r#"{"case": {"kind": "rational"}, "n": 2, "d": 2, "label": "pair"}"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run_in(d.path(), &["construct", "--seed", "77"], cfg);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["pair.soliton.json", "pair.report.json", "manifest.json"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    // another seed gives other data
    let c = tempfile::tempdir().unwrap();
    run_in(c.path(), &["construct", "--seed", "78"], cfg);
    let x = std::fs::read(a.path().join("out/pair.soliton.json")).unwrap();
    let z = std::fs::read(c.path().join("out/pair.soliton.json")).unwrap();
    assert_ne!(x, z);
}

#[test]
fn zero_field_has_flat_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"case": {"kind": "trigonometric", "period": 5.0}, "initial": "zero",
                  "grid": {"domain": {"kind": "periodic", "period": 5.0}, "n_points": 64}, "label": "z"}"#;
    let out = run_in(dir.path(), &["evolve"], cfg);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("out/z.invariants.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert!(rows.len() > 2);
    assert!(rows.iter().all(|r| r[1..].iter().all(|v| *v == 0.0)));
}

#[test]
fn verify_and_evolve_a_certified_soliton() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"case": {"kind": "trigonometric", "period": 7.0}, "n": 2, "label": "s"}"#;
    assert_eq!(run_in(dir.path(), &["construct", "--seed", "5"], cfg).status.code(), Some(0));
    std::fs::rename(dir.path().join("out/s.soliton.json"), dir.path().join("s.soliton.json")).unwrap();
    let cfg = r#"{"input": "s.soliton.json", "label": "s", "times": [0.0, 0.3], "t_end": 0.1}"#;
    let out = run_in(dir.path(), &["verify", "--threads", "2"], cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&dir.path().join("out/s.report.json"));
    let checks = rep["checks"].as_array().unwrap();
    assert!(checks.len() >= 6);
    assert!(checks.iter().all(|c| c["passed"] == Value::Bool(true)));

    let out = run_in(dir.path(), &["evolve"], cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/s.final.csv").exists());
}

#[test]
fn missing_input_is_a_precondition_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["verify"], "{}");
    assert_eq!(out.status.code(), Some(21));
    assert_eq!(json(&dir.path().join("out/manifest.json"))["error"]["kind"], "precondition");
}

#[test]
fn failing_check_exits_one_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"case": {"kind": "trigonometric", "period": 7.0}, "n": 1, "label": "s"}"#;
    run_in(dir.path(), &["construct"], cfg);
    std::fs::rename(dir.path().join("out/s.soliton.json"), dir.path().join("s.soliton.json")).unwrap();
    // an unreachable tolerance
    let cfg = r#"{"input": "s.soliton.json", "label": "s", "times": [0.0], "check_tol": 1e-30}"#;
    let out = run_in(dir.path(), &["verify"], cfg);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&dir.path().join("out/manifest.json"))["status"], "failed");
}

#[test]
fn suite_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["suite", "--seed", "3"], r#"{"only": [1, 3, 11]}"#);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 3, "{stdout}");
    let rep = json(&dir.path().join("out/run.report.json"));
    assert_eq!(rep["seed"], 3);
    assert_eq!(rep["results"].as_array().unwrap().len(), 3);
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["construct"], r#"{"poles": 3}"#);
    assert_eq!(out.status.code(), Some(2));
}
