use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn critsys(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critsys")).args(args).output().expect("running the CLI")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON report")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn constants_table_matches_library() {
    let out = critsys(&["constants", "--n", "3..8"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = report(&out)["result"]["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[1]["n"], 4);
    assert_eq!(rows[1]["sharp_constant"].as_f64().unwrap(), critsys::sharp_constant(4).unwrap());
}

#[test]
fn verify_constant_triple_passes() {
    let out = critsys(&["verify", "--family", "remark13", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = report(&out);
    assert_eq!(rep["passed"], true);
    for r in rep["result"]["cases"][0]["residuals"].as_array().unwrap() {
        assert!(r.as_f64().unwrap() <= 1e-12);
    }
}

#[test]
fn verify_reports_check_failure_with_exit_one() {
    let out = critsys(&["verify", "--family", "sphere_yamabe", "--lambda", "1.5", "--n", "4"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["passed"], false);
    let out = critsys(&["verify", "--family", "sphere_yamabe", "--lambda", "3", "--n", "4"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn minimize_reaches_sobolev_bound() {
    let out = critsys(&["minimize", "--model", "sphere:n=4", "--coupling", "yamabe-diag:p=2"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = report(&out);
    assert!(rep["result"]["relative_gap_to_bound"].as_f64().unwrap().abs() <= 1e-3);
    assert_eq!(rep["config"]["coupling"]["kind"], "yamabe_diag");
}

#[test]
fn blowup_writes_one_csv_row_per_member() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = critsys(&["blowup", "--N", "2048", "--lambda-grid", "1.5,1.1,1.01", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(out_dir.join("blowup.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
    assert!(csv.starts_with("index,lambda,mu,R_delta"));
    let json: Value = serde_json::from_slice(&std::fs::read(out_dir.join("blowup.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["lambda_grid"].as_array().unwrap().len(), 3);
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[blowup]\nn = 5\nnodes = 1024\nlambda_grid = [1.5, 1.1]\n");
    let out = critsys(&["blowup", "--config", &cfg, "--delta", "0.25"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = report(&out);
    assert_eq!(rep["config"]["n"], 5);
    assert_eq!(rep["config"]["diagnose"]["delta"], 0.25);
    assert_eq!(rep["result"]["report"]["members"].as_array().unwrap().len(), 2);
}

#[test]
fn printed_defaults_load_back() {
    let out = critsys(&["--print-defaults"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[multiplicity]"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &text);
    assert_eq!(critsys(&["constants", "--config", &cfg]).status.code(), Some(0));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[verify]\nfamly = \"remark13\"\n");
    assert_eq!(critsys(&["verify", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(critsys(&["blowup", "--family", "remark99"]).status.code(), Some(2));
    assert_eq!(critsys(&["minimize", "--coupling", "bogus:p=1"]).status.code(), Some(2));
    assert_eq!(critsys(&["minimize", "--model", "torus:n=4"]).status.code(), Some(2));
    assert_eq!(critsys(&["constants", "--n", "2"]).status.code(), Some(2));
    assert_eq!(critsys(&["constants", "--delta", "0.5"]).status.code(), Some(2));
    assert_eq!(critsys(&["verify", "--family", "remark13", "--lambda", "-1"]).status.code(), Some(2));
    assert_eq!(critsys(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(critsys(&[]).status.code(), Some(2));
}

#[test]
fn unconverged_run_exits_one_with_report() {
    let out = critsys(&["solve", "--N", "128", "--config", "/dev/null"]);
    assert_eq!(out.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[solve.options]\nmax_iter = 1\ntol = 1e-14\n");
    let out = critsys(&["solve", "--config", &cfg, "--N", "128"]);
    assert_eq!(out.status.code(), Some(1));
    let rep = report(&out);
    assert_eq!(rep["passed"], false);
    assert_eq!(rep["result"]["converged"], false);
}

#[test]
fn solution_csv_has_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let out = critsys(&["solve", "--N", "64", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("solve_u1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 64);
}
