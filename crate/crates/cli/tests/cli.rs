use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const PRODUCT: &str = r#"{
  "coordinates": [{"name": "X1", "values": ["0", "1"]}, {"name": "X2", "values": ["0", "1"]}],
  "support": [
    {"atoms": ["0", "0"], "weight": "1/4"}, {"atoms": ["0", "1"], "weight": "1/4"},
    {"atoms": ["1", "0"], "weight": "1/4"}, {"atoms": ["1", "1"], "weight": "1/4"}
  ]
}"#;

const DIAGONAL: &str = r#"{
  "coordinates": [{"name": "X1", "values": ["0", "1"]}, {"name": "X2", "values": ["0", "2"]}],
  "support": [{"atoms": ["0", "0"], "weight": "1/2"}, {"atoms": ["1", "2"], "weight": "1/2"}]
}"#;

const ANTI: &str = r#"{
  "coordinates": [{"name": "X1", "values": ["0", "1"]}, {"name": "X2", "values": ["0", "2"]}],
  "support": [{"atoms": ["0", "2"], "weight": "1/2"}, {"atoms": ["1", "0"], "weight": "1/2"}]
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causal-ot"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("CAUSAL_OT_WORKERS").output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn appendix_b_reports_violation() {
    let out = run(&["appendix-b"]);
    assert_eq!(out.status.code(), Some(0));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("triangle inequality: VIOLATED"), "{err}");
    let v = json(&out);
    assert_eq!(v["appendix_b"]["violated"], Value::Bool(true));
}

#[test]
fn appendix_b_with_out_prints_summary() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("r.json");
    let out = run(&["appendix-b", "--out", s(&path)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("VIOLATED"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["appendix_b"]["values"].as_array().unwrap().len(), 3);
}

#[test]
fn check_product_measure() {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "m.json", PRODUCT);
    let out = run(&["check", "--measure", s(&m), "--graph", "empty"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("G-compatible: true"));

    let d = write(dir.path(), "d.json", DIAGONAL);
    let out = run(&["check", "--measure", s(&d), "--graph", "empty"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("G-compatible: false"));
}

#[test]
fn adding_edges_never_lowers_the_distance() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.json", DIAGONAL);
    let b = write(dir.path(), "b.json", ANTI);
    let value = |graph: &str, mode: &str| {
        let out = run(&["dist", "--mu", s(&a), "--nu", s(&b), "--graph", graph, "--mode", mode, "--p", "2"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        json(&out)["result"]["cost"].as_f64().unwrap()
    };
    let standard = value("full", "standard");
    let full = value("full", "bicausal");
    let linear = value("linear", "bicausal");
    assert!((standard - full).abs() < 1e-9);
    assert!(linear >= full - 1e-9, "linear {linear} < full {full}");
}

#[test]
fn reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.json", DIAGONAL);
    let b = write(dir.path(), "b.json", PRODUCT);
    let args = ["dist", "--mu", s(&a), "--nu", s(&b), "--graph", "markov", "--emit-plan", "--seed", "7"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);

    let e1 = run(&["ate-experiment", "--random", "5", "--format", "csv"]);
    let e2 = run(&["ate-experiment", "--random", "5", "--format", "csv", "--workers", "3"]);
    assert_eq!(e1.status.code(), Some(0));
    assert_eq!(e1.stdout, e2.stdout);
    assert!(String::from_utf8_lossy(&e1.stdout).starts_with("pair,psi_mu,psi_nu,d_psi,w_g1,w_1,bound,holds"));
}

#[test]
fn bad_input_exits_one() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"coordinates": [], "support": [], "extra": 1}"#);
    let ok = write(dir.path(), "ok.json", PRODUCT);
    for args in [
        vec!["check", "--measure", s(&bad)],
        vec!["check", "--measure", "/nonexistent/m.json"],
        vec!["dist", "--mu", s(&ok), "--nu", s(&ok), "--tol", "-1"],
        vec!["dist", "--mu", s(&ok), "--nu", s(&ok), "--graph", "nonsense"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(err.lines().count(), 1, "{err}");
    }
}

#[test]
fn incompatible_marginal_is_rejected() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.json", DIAGONAL);
    let b = write(dir.path(), "b.json", PRODUCT);
    let out = run(&["dist", "--mu", s(&a), "--nu", s(&b), "--graph", "empty"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.json", DIAGONAL);
    let b = write(dir.path(), "b.json", ANTI);
    let cfg = write(dir.path(), "c.toml", "p = 2.0\nmode = \"standard\"\nseed = 3\n");
    let out = run(&["dist", "--mu", s(&a), "--nu", s(&b), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["config"]["p"], 2.0);
    assert_eq!(v["config"]["seed"], 3);
    assert_eq!(v["config"]["mode"], "standard");
    let bad = write(dir.path(), "bad.toml", "nope = 1\n");
    assert_eq!(run(&["dist", "--mu", s(&a), "--nu", s(&b), "--config", s(&bad)]).status.code(), Some(1));
}

#[test]
fn interpolate_and_examples() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.json", DIAGONAL);
    let b = write(dir.path(), "b.json", ANTI);
    let out = run(&["interpolate", "--mu", s(&a), "--nu", s(&b), "--graph", "linear", "--p", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["measures"].as_array().unwrap().len(), 11);

    let out = run(&["examples"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["examples"]["three_point"]["path"]["exceptions"][0], "1/2");
}

#[test]
fn perturbation_and_repair() {
    let out = run(&["perturb", "--random", "4", "--exact"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["reports"].as_array().unwrap().len(), 4);

    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "m.csv", "0,1,5\n1,0,1\n5,1,0\n");
    let out = run(&["repair-metric", "--matrix", s(&m), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "0,1,2\n1,0,1\n2,1,0\n");
}
