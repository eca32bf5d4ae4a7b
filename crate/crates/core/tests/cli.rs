use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use quasimode_lab::flat_quasimode::SampledField;
use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasimode-lab"))
        .args(args)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exponents_to_stdout_embeds_config_and_version() {
    let out = lab(&[
        "exponents",
        "--n",
        "3",
        "--k",
        "2",
        "--p",
        "2,4,inf",
        "--beta",
        "0.75",
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["format"], "quasimode-lab/exponents");
    assert_eq!(v["version"], 1);
    assert_eq!(v["config"]["k"], 2);
    assert_eq!(v["config"]["p"], serde_json::json!(["2", "4", "inf"]));
    let rows = v["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["sigma"]["exact"], "-1/8");
    assert_eq!(v["passed"], true);
}

#[test]
fn scaling_writes_one_csv_row_per_p_and_h() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = lab(&[
        "scaling",
        "--p",
        "2,inf",
        "--h-start",
        "4",
        "--h-count",
        "4",
        "--out",
        out_dir,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# quasimode-lab/scaling version 1"));
    assert!(lines[1].starts_with("# config: {"));
    assert_eq!(lines[2], "n,k,p,beta,alpha,h,norm,nodes,ms");
    assert_eq!(lines.len(), 3 + 2 * 4);
    let norm: f64 = lines[3].split(',').nth(6).unwrap().parse().unwrap();
    assert!(norm > 0.0);
    let report = json(&dir.path().join("scaling.json"));
    assert_eq!(report["results"]["fits"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_is_read_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("predict.json");
    fs::write(&cfg, r#"{"n": 4, "k": 2, "p": ["5/2"], "beta": 0.9}"#).unwrap();
    let out = lab(&[
        "predict",
        "--config",
        cfg.to_str().unwrap(),
        "--beta",
        "0.6",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["n"], 4);
    assert_eq!(v["config"]["beta"], 0.6);
    assert_eq!(v["config"]["p"][0], "5/2");
}

#[test]
fn quasimode_field_file_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&[
        "quasimode",
        "--h-start",
        "4",
        "--alpha",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let bytes = fs::read(dir.path().join("field.bin")).unwrap();
    let field = SampledField::read_binary(&bytes[..]).unwrap();
    assert_eq!(field.meta.alpha, 0.5);
    assert_eq!(field.values.len(), field.grid.len());
    let report = json(&dir.path().join("quasimode.json"));
    assert_eq!(report["results"]["field_file"], "field.bin");
    assert_eq!(report["passed"], true);
}

#[test]
fn sphere_small_degree_runs_every_check() {
    let out = lab(&["sphere", "--j", "16", "--alpha", "0.4"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let names: Vec<&str> = v["verifications"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"finite-difference Laplacian residual"));
    assert!(names.contains(&"u1 norm relative error"));
}

#[test]
fn exit_codes_distinguish_failures() {
    assert_eq!(lab(&["sphere", "--alpha", "0.6"]).status.code(), Some(2));
    assert_eq!(lab(&["predict", "--beta", "-1"]).status.code(), Some(2));
    assert_eq!(lab(&["exponents", "--j", "4"]).status.code(), Some(2));
    assert_eq!(lab(&["scaling", "--h-count", "2"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let coarse = dir.path().join("coarse.json");
    fs::write(&coarse, r#"{"grid": {"step_over_h": 0.5}, "h_count": 3}"#).unwrap();
    assert_eq!(
        lab(&["scaling", "--config", coarse.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );

    let strict = dir.path().join("strict.json");
    fs::write(&strict, r#"{"p": ["4"], "h_count": 3, "tolerance": 1e-6}"#).unwrap();
    let out_dir = dir.path().join("strict-out");
    let out = lab(&[
        "scaling",
        "--config",
        strict.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    // the failing report is still written
    assert_eq!(json(&out_dir.join("scaling.json"))["passed"], false);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"jj": 3}"#).unwrap();
    let out = lab(&["sphere", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
