//! End-to-end runs of the `qn-epb` binary.

use std::path::Path;
use std::process::{Command, Output};

fn qn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qn-epb"))
        .args(args)
        .env("QNEPB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("MANIFEST.json")).unwrap()).unwrap()
}

#[test]
fn five_branch_run_writes_manifest_and_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fb");
    let o = qn(&["run", "--case", "five_branch", "--eps", "1", "--cells", "50", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let m = manifest(&out);
    assert_eq!(m["status"], "completed");
    assert_eq!(m["t_reached"].as_f64().unwrap(), 1.0);
    assert!(m["mass_drift"].as_f64().unwrap() < 1e-12);
    assert!(m["min_rho"].as_f64().unwrap() > 0.0);
    for snap in m["snapshots"].as_array().unwrap() {
        for f in snap["files"].as_array().unwrap() {
            assert!(out.join(f.as_str().unwrap()).is_file());
        }
    }
    let csv = std::fs::read_to_string(out.join("snap_000.csv")).unwrap();
    assert!(csv.starts_with("x,rho,u,phi"));
    assert_eq!(csv.lines().count(), 51);
    assert!(out.join("diagnostics.csv").is_file());
}

#[test]
fn riemann_snapshot_carries_exact_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("rp");
    let o = qn(&[
        "run", "--case", "riemann", "--scheme", "ice", "--cells", "200", "--nr", "0.75", "--tfinal", "5", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    let last = m["snapshots"].as_array().unwrap().last().unwrap()["files"][0].as_str().unwrap().to_string();
    let csv = std::fs::read_to_string(out.join(last)).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.contains("rho_exact") && header.contains("u_exact"), "{header}");
}

#[test]
fn explosion_writes_vtk_and_radial_cut() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ex");
    let o = qn(&[
        "run", "--case", "cylindrical_explosion", "--cells", "20x20", "--tfinal", "0.05", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("snap_000.vtk").is_file());
    assert!(out.join("radial_cut.csv").is_file());
}

#[test]
fn config_file_and_bad_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"case": "five_branch", "cells": [30], "eps": 0.5, "t_final": 0.1}"#).unwrap();
    let out = tmp.path().join("c");
    let o = qn(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&out)["config"]["case"]["eps"].as_f64().unwrap(), 0.5);

    std::fs::write(&cfg, r#"{"case": "five_branch", "epsilon": 0.5}"#).unwrap();
    let o = qn(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());

    let o = qn(&["run", "--case", "no_such_case"]);
    assert!(!o.status.success());
}

#[test]
fn verify_quick_operators_as_json() {
    let o = qn(&["verify", "--suite", "operators", "--quick", "--json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let line = String::from_utf8(o.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn list_cases_names_every_case() {
    let o = qn(&["list-cases"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["five_branch", "riemann", "sheath_1d", "cylindrical_explosion", "shock_tube"] {
        assert!(text.contains(name), "{name} missing");
    }
    let o = qn(&["list-cases", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 7);
}
