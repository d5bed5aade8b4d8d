use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ethlab::models::ModelSpec;
use serde_json::Value;

fn eth_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eth-lab"))
        .args(args)
        .env("ETHLAB_THREADS", "1")
        .output()
        .expect("spawn eth-lab")
}

fn ok(args: &[&str]) -> String {
    let out = eth_lab(args);
    assert!(
        out.status.success(),
        "eth-lab {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Diagonalizes `1+nb` into `<root>/cache` and returns the cache directory.
fn cache(root: &Path, nb: usize) -> PathBuf {
    ok(&["diag", "--sys-sites", "1", "--bath-sites", &nb.to_string(), "--out", s(&root.join("cache"))]);
    root.join("cache").join(ModelSpec::default_benchmark(1, nb).content_hash())
}

#[test]
fn build_writes_model_and_split_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    ok(&["build", "--sys-sites", "1", "--bath-sites", "4", "--out", s(&out)]);
    let spec = ModelSpec::from_json(&std::fs::read_to_string(out.join("model.json")).unwrap()).unwrap();
    let report = json(&out.join("split_report.json"));
    assert_eq!(report["model_hash"], spec.content_hash());
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "build");
    assert_eq!(manifest["outputs"], serde_json::json!(["model.json", "split_report.json"]));
}

#[test]
fn diag_then_eth_reports_eps_measured() {
    let tmp = tempfile::tempdir().unwrap();
    let spec_path = tmp.path().join("model.json");
    std::fs::write(&spec_path, ModelSpec::default_benchmark(1, 5).to_json_pretty()).unwrap();
    ok(&["diag", "--spec", s(&spec_path), "--out", s(&tmp.path().join("cache"))]);
    let dir = tmp.path().join("cache").join(ModelSpec::default_benchmark(1, 5).content_hash());
    for f in ["meta.json", "energies.f64", "eigvecs.c128", "model.json", "manifest.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }

    let out = tmp.path().join("eth");
    ok(&["eth", "--cache", s(&dir), "--emin", "-2", "--emax", "2", "--delta", "0.1", "--out", s(&out)]);
    let r = json(&out.join("eth_report.json"));
    assert!(r["eps_measured"].as_f64().unwrap() >= 0.0);
    assert_eq!(r["delta"], 0.1);

    ok(&["eth", "--cache", s(&dir), "--delta", "0.05,0.1,0.2", "--out", s(&out), "--formats", "json,csv,svg"]);
    let curve = std::fs::read_to_string(out.join("eth_curve.csv")).unwrap();
    assert!(curve.starts_with("delta,eps_measured,pair_count,worst_n,worst_m\n"));
    assert_eq!(curve.lines().count(), 4);
    assert!(out.join("eth_curve.svg").exists());
}

#[test]
fn thermo_csv_has_the_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = cache(tmp.path(), 5);
    let out = tmp.path().join("t");
    ok(&["thermo", "--cache", s(&dir), "--grid-points", "64", "--out", s(&out)]);
    let text = std::fs::read_to_string(out.join("thermo.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "E,dos,S,beta,C,in_valid_range");
    assert_eq!(text.lines().count(), 65);
    let p: ethlab::thermo::ThermoProfile = ethlab::analysis::read_json(&out.join("thermo.json")).unwrap();
    assert_eq!(p.energy_grid.len(), 64);
}

#[test]
fn stale_cache_is_refused_without_leftovers() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = cache(tmp.path(), 4);
    let other = tmp.path().join("other.json");
    std::fs::write(&other, ModelSpec::default_benchmark(1, 5).to_json_pretty()).unwrap();
    let out = tmp.path().join("x");
    let r = eth_lab(&["eth", "--cache", s(&dir), "--spec", s(&other), "--delta", "0.1", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("stale"));
    assert!(!out.exists());
}

#[test]
fn invalid_arguments_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = cache(tmp.path(), 4);
    let out = tmp.path().join("x");
    let r = eth_lab(&["bounds", "--cache", s(&dir), "--E", "0", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let r = eth_lab(&["eth", "--cache", s(&dir), "--delta", "-1", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn audit_without_valid_range_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = cache(tmp.path(), 6);
    let out = tmp.path().join("a");
    let r = eth_lab(&["audit", "--cache", s(&dir), "--grid", "2x2", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn audit_writes_a_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = cache(tmp.path(), 8);
    let out = tmp.path().join("a");
    ok(&["audit", "--cache", s(&dir), "--grid", "2x2", "--products", "16", "--entangled", "8", "--out", s(&out)]);
    let v = json(&out.join("verdict.json"));
    for key in ["eth_pred", "eth_measured", "bath_ideal"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let cells = std::fs::read_to_string(out.join("audit_cells.csv")).unwrap();
    assert!(cells.lines().count() >= 5);
    let bounds = std::fs::read_to_string(out.join("audit_bounds.csv")).unwrap();
    assert!(bounds.starts_with("cell,n,E_n,E,delta_b,name,lhs,rhs,slack,holds,verdict\n"));
}

#[test]
fn therm_bounds_evolve_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = cache(tmp.path(), 5);
    let out = tmp.path().join("o");

    ok(&["therm", "--cache", s(&dir), "--E", "0", "--delta-b", "1.5", "--products", "8", "--out", s(&out)]);
    let t = json(&out.join("therm_report.json"));
    assert!(t["eps_entangled"].as_f64().unwrap() >= t["eps_product"].as_f64().unwrap());
    assert_eq!(json(&out.join("lemma1.json"))["name"], "lemma1");

    let r = eth_lab(&["bounds", "--cache", s(&dir), "--E", "0", "--delta-b", "2", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2), "no valid range at 1+5");
    let big = cache(tmp.path(), 8);
    ok(&["bounds", "--cache", s(&big), "--E", "0", "--delta-b", "2", "--products", "8", "--out", s(&out)]);
    let b = json(&out.join("bounds.json"));
    assert_eq!(b["cells"].as_array().unwrap().len(), 1);

    ok(&["evolve", "--cache", s(&dir), "--system-basis", "0", "--bath-eigen", "3", "--points", "11", "--out", s(&out)]);
    let ev = std::fs::read_to_string(out.join("evolve.csv")).unwrap();
    assert_eq!(ev.lines().count(), 12);
    assert!(json(&out.join("evolve.json"))["average_distance"].as_f64().unwrap() < 1e-2);

    ok(&["thermo", "--cache", s(&dir), "--out", s(&out)]);
    let plots = tmp.path().join("p");
    ok(&["plot", "--bounds", s(&out.join("bounds.json")), "--thermo", s(&out.join("thermo.json")), "--out", s(&plots)]);
    for f in ["bounds_scatter.svg", "thermo.svg"] {
        assert!(std::fs::read_to_string(plots.join(f)).unwrap().starts_with("<svg"));
    }
    let r = eth_lab(&["plot", "--eth", s(&tmp.path().join("missing.json")), "--out", s(&tmp.path().join("q"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!tmp.path().join("q").exists());
}
