use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn bmk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmk")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn spectrum_of_ball() {
    let o = bmk(&["spectrum", "--body", "ball", "--dim", "2", "--json"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["schema"], "bmk/1");
    assert!((r["result"]["lambda3"].as_f64().unwrap() - 3.0).abs() < 1e-8);
}

#[test]
fn failed_check_exits_two() {
    let o = bmk(&["spectrum", "--body", "ellipsoid", "--tol", "1e-30"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn lp_bm_against_ball() {
    let o = bmk(&["verify", "lp-bm", "--bodies", "ellipsoid:2,1", "ball", "--p", "0", "--lambda-grid", "11", "--dim", "2", "--json"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["result"]["points"].as_array().unwrap().len(), 11);
    assert!(r["result"]["margin"].as_f64().unwrap() >= -1e-9);
}

#[test]
fn constant_forcing_in_space() {
    let o = bmk(&["solve", "--f-const", "1", "--p", "0.5", "--dim", "3", "--json"]);
    assert_eq!(code(&o), 0);
    let c = json(&o)["result"]["solution"]["coefficients"].clone();
    let c: Vec<f64> = serde_json::from_value(c).unwrap();
    let unit = (4.0 * std::f64::consts::PI).sqrt();
    assert!((c[0] - unit).abs() < 1e-10, "{}", c[0]);
    assert!(c[1..].iter().all(|x| x.abs() < 1e-10));
}

#[test]
fn catalog_table_and_json() {
    let o = bmk(&["catalog"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(names, ["ball", "ellipsoid", "smoothed_cube", "perturbed_ball"]);
    let arr = json(&bmk(&["catalog", "--json"]));
    assert_eq!(arr.as_array().unwrap().len(), 4);
}

#[test]
fn custom_catalog_merges_and_rejects_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let extra = dir.path().join("extra.json");
    std::fs::write(&extra, r#"[{"name": "fat", "kind": "ellipsoid", "params": {"semiaxes": [3, 1]}}]"#).unwrap();
    let o = bmk(&["catalog", "--json", "--catalog", extra.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o).as_array().unwrap().len(), 5);
    let o = bmk(&["spectrum", "--body", "fat", "--catalog", extra.to_str().unwrap()]);
    assert_eq!(code(&o), 0);

    let dup = dir.path().join("dup.json");
    std::fs::write(&dup, r#"[{"name": "ball", "kind": "ball", "params": {"radius": 2}}]"#).unwrap();
    let o = bmk(&["catalog", "--catalog", dup.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stderr).unwrap().contains("duplicate"));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"operation": "spectrum", "modez": 32}"#).unwrap();
    let o = bmk(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stderr).unwrap().contains("modez"));

    std::fs::write(&cfg, r#"{"operation": "spectrum", "tol": 0}"#).unwrap();
    let o = bmk(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stderr).unwrap().contains("`tol`"));

    assert_eq!(code(&bmk(&["--dim", "4", "catalog"])), 1);
    assert_eq!(code(&bmk(&["no-such-command"])), 1);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"operation": "spectrum", "body": "ellipsoid", "dim": 3, "modes": 8}"#).unwrap();
    let r = json(&bmk(&["--config", cfg.to_str().unwrap(), "--dim", "2", "--json"]));
    assert_eq!(r["dim"], 2);
    assert_eq!(r["band"], 8);
    assert_eq!(r["result"]["body"], "ellipsoid");
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> (Vec<u8>, Vec<u8>) {
    let out = dir.join(format!("{name}.json"));
    let mut all = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    let o = bmk(&all);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    (std::fs::read(&out).unwrap(), std::fs::read(out.with_extension("csv")).unwrap())
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["equivalence", "--trials", "25", "--seed", "11"];
    let a = run_to(dir.path(), "a", &args);
    let b = run_to(dir.path(), "b", &args);
    assert_eq!(a, b);
    let report: Value = serde_json::from_slice(&a.0).unwrap();
    assert_eq!(report["seed"], 11);
    let rows = String::from_utf8(a.1).unwrap().lines().count();
    assert_eq!(rows, 1 + 4 * 25);

    let (_, csv) = run_to(dir.path(), "v", &["verify", "bm", "--bodies", "ball", "ellipsoid", "perturbed_ball"]);
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 3 * 11);
}

#[test]
fn quick_suite_is_fast_and_deterministic() {
    let t = Instant::now();
    let a = bmk(&["suite", "quick", "--json"]);
    assert!(t.elapsed().as_secs_f64() < 60.0);
    assert!(matches!(code(&a), 0 | 2));
    let b = bmk(&["suite", "quick", "--json"]);
    assert!(a.stdout == b.stdout, "quick suite output differs between runs");
    let criteria = json(&a)["criteria"].as_array().unwrap().len();
    assert_eq!(criteria, 10);
}
