use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use loewner_lab::driver::{Driver, TimeGrid};
use loewner_lab::io::{read_driver_files, read_trace_files, write_driver_files};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_loewner-lab"));
    c.env_remove("LOEWNER_LAB_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn zero_driver_file(dir: &Path, cells: usize) -> String {
    let p = dir.join("zero.csv");
    write_driver_files(&Driver::<f64>::zero(TimeGrid::uniform(cells, 1.0).unwrap()), &p).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn zero_driver_traces_the_slit() {
    let tmp = tempfile::tempdir().unwrap();
    let drv = zero_driver_file(tmp.path(), 64);
    let out = tmp.path().join("t");
    let o = run(&["trace", "--driver", &drv, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let tr = read_trace_files(&out.join("trace.csv")).unwrap();
    let tip = tr.points()[tr.len() - 1];
    assert!(tip.re.abs() < 1e-9 && (tip.im - 2.0).abs() < 1e-6, "{tip}");
    let r = report(&out);
    assert_eq!(r["hull"]["holds"], true);
    assert_eq!(r["run"]["command"], "trace");
    assert!(out.join("trace.json").exists() && out.join("trace.svg").exists());
}

#[test]
fn malformed_driver_is_an_input_error_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let drv = zero_driver_file(tmp.path(), 4);
    fs::write(&drv, "t,value\n0,0\n0.5,zz\n1,0\n").unwrap();
    let o = run(&["trace", "--driver", &drv, "--out", tmp.path().join("t").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn zip_slit_and_reject_crossing() {
    let tmp = tempfile::tempdir().unwrap();
    let slit = tmp.path().join("slit.csv");
    let rows: String = (0..=10).map(|k| format!("0,{}\n", 0.2 * k as f64)).collect();
    fs::write(&slit, format!("re,im\n{rows}")).unwrap();
    let out = tmp.path().join("z");
    let o = run(&["zip", "--curve", slit.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = read_driver_files(&out.join("driver.csv")).unwrap();
    assert!(d.sup_abs() < 1e-12);
    assert!((d.t_end() - 1.0).abs() < 1e-12);
    assert!((report(&out)["hcap"].as_f64().unwrap() - 2.0).abs() < 1e-12);

    let bow = tmp.path().join("bow.csv");
    fs::write(&bow, "re,im\n0,0\n0,1\n1,2\n1,1\n-1,1.5\n").unwrap();
    let o = run(&["zip", "--curve", bow.to_str().unwrap(), "--out", tmp.path().join("b").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn sample_writes_driver_trace_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let o = run(&["sample", "--kappa", "2", "--seed", "7", "--n", "64", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = read_driver_files(&out.join("driver.csv")).unwrap();
    assert_eq!(d.grid().cells(), 64);
    let r = report(&out);
    assert_eq!(r["summary"]["seed"], 7);
    assert_eq!(r["hull"]["holds"], true);
    let side: Value = serde_json::from_slice(&fs::read(out.join("trace.json")).unwrap()).unwrap();
    assert_eq!(side["driver_digest"], r["driver_digest"]);
}

#[test]
fn christmas_tree_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = run(&["experiment", "christmas-tree", "--n", "16", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert!(r["summary"]["fitted_c"].as_f64().unwrap() > 0.0);
    assert!(r["runs"][0]["sup_distance"].as_f64().unwrap() >= 0.2);
    assert!(r["runs"][0]["strong_distance"].is_number());
    assert!(fs::read_to_string(out.join("runs.csv")).unwrap().lines().count() == 2);
}

#[test]
fn certify_equal_drivers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = run(&["experiment", "certify", "--a", "1", "--n", "16", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["certificate"]["certified"], true);
    assert_eq!(r["certificate"]["within_bound"], true);
    assert!(out.join("knots.csv").exists() && out.join("schedule.svg").exists());
}

#[test]
fn certify_refuses_a_rough_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("rough.csv");
    let g = TimeGrid::uniform(64, 1.0).unwrap();
    let d = Driver::from_fn(g, loewner_lab::Interpolation::PiecewiseLinear, |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            3.0 * ((t * 64.0).round() as i64 % 2) as f64 * (1.0 / 64.0f64).sqrt()
        }
    });
    write_driver_files(&d, &p).unwrap();
    let out = tmp.path().join("c");
    let o = run(&["experiment", "certify", "--lam", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&out)["certified"], false);
}

#[test]
fn support_probe_hits_with_kappa_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("p");
    let o = run(&[
        "experiment", "support-probe", "--kappa", "2", "--epsilon", "0.5", "--n", "300", "--seed", "3", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert!(r["summary"]["hits"].as_u64().unwrap() > 0);
    assert!(r["summary"]["ci_low"].as_f64().unwrap() <= r["summary"]["p_hat"].as_f64().unwrap());
    assert_eq!(r["seeds"].as_array().unwrap().len(), 300);
}

#[test]
fn reruns_are_bit_identical_and_config_is_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("wz.json");
    fs::write(&cfg, r#"{"kappa": 2.0, "seed": 4, "n_list": [8, 32], "reference_cells": 256, "out_cells": 64}"#).unwrap();
    let out = tmp.path().join("w");
    let args = ["experiment", "wong-zakai", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(code(&run(&args)), 0);
    let first = fs::read(out.join("report.json")).unwrap();
    let o = bin().args(args).env("LOEWNER_LAB_THREADS", "1").output().unwrap();
    assert_eq!(code(&o), 0);
    let r = report(&out);
    assert_eq!(r["config"]["n_list"], serde_json::json!([8, 32]));
    assert_eq!(r["run"]["threads"], 1);
    let mut a: Value = serde_json::from_slice(&first).unwrap();
    let mut b = r.clone();
    a["run"]["threads"] = Value::Null;
    b["run"]["threads"] = Value::Null;
    assert_eq!(a, b);
}

#[test]
fn bad_flags_and_environment_are_input_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(code(&run(&["experiment", "nope", "--out", out.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["sample", "--n", "8", "--tol", "-1", "--out", out.to_str().unwrap()])), 2);
    let o = bin()
        .args(["sample", "--n", "8", "--out", out.to_str().unwrap()])
        .env("LOEWNER_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"kappa\": ").unwrap();
    let o = run(&["experiment", "wong-zakai", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}
