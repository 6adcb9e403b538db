//! Smoke runs of the `phongfit` binary.

use std::path::Path;
use std::process::Command;

fn phongfit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_phongfit")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_from_files_recovers_the_pose() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("tri.obj");
    std::fs::write(&mesh, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
    let data = dir.path().join("data.csv");
    let mut text = String::from("x,y,z,nx,ny,nz\n");
    for (x, y) in [(0.1, 0.1), (0.5, 0.2), (0.2, 0.6), (0.3, 0.3)] {
        text += &format!("{x},{y},0.25,0,0,1\n");
    }
    std::fs::write(&data, text).unwrap();
    let out = dir.path().join("out");
    let o = phongfit(&["fit", "--mesh", arg(&mesh), "--data", arg(&data), "--lambda-n", "0", "--iters", "30", "--out-dir", arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    let tz = doc["report"]["theta"][2].as_f64().unwrap();
    assert!((tz - 0.25).abs() < 1e-6, "{tz}");
    assert!(out.join("fit_trace.csv").exists());
}

#[test]
fn study_writes_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = phongfit(&["study", "--trials", "2", "--iters", "10", "--surface", "phong", "--optimizer", "lifted", "--jobs", "1", "--out-dir", arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trials.csv", "iterations.csv", "convergence.csv", "binned.csv", "ablation.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn bad_input_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let o = phongfit(&["probe", "--count", "0", "--out-dir", arg(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 1"));
    let o = phongfit(&["fit", "--surface", "nurbs"]);
    assert!(!o.status.success());
}
