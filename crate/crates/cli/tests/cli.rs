use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn imop(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imop"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("IMOP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn result_line(o: &Output) -> Value {
    let stdout = String::from_utf8(o.stdout.clone()).unwrap();
    assert_eq!(stdout.lines().count(), 1, "stdout: {stdout}");
    serde_json::from_str(stdout.trim()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SMALL_RHS: &str = r#"{"name":"rhs","fixture":"mqp-rhs","n":[8],"k":[6],
  "estimator":{"kind":"clustering","config":{"kmeans_restarts":5,"fit":{"random_starts":1}}},"seed":1}"#;

#[test]
fn missing_config_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = imop(&["estimate", "--config", tmp.path().join("nope.json").to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    let diag: Value = serde_json::from_str(String::from_utf8(o.stderr).unwrap().lines().last().unwrap()).unwrap();
    assert_eq!(diag["status"], "error");

    let o = imop(&["forward"], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn unknown_subcommand_prints_usage() {
    let tmp = tempfile::tempdir().unwrap();
    let o = imop(&["frobnicate"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("Usage"));
}

#[test]
fn invalid_config_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.json", r#"{"name":"x","fixture":"mqp-rhs","n":[5],"k":[6],"repetitions":0,
        "estimator":{"kind":"oracle","resolution":0.1}}"#);
    let o = imop(&["replicate", "--config", &cfg], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn forward_writes_solutions() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "f.json", r#"{"fixture":"example1","weights":[[1,0],[0.5,0.5],[0,1]]}"#);
    let o = imop(&["forward", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let v = result_line(&o);
    assert_eq!(v["solutions"], 3);
    let data: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("example1_forward.json")).unwrap()).unwrap();
    let x = |i: usize| -> Vec<f64> {
        data["solutions"][i]["x"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
    };
    // f1 alone is minimised at the origin, f2 alone at the vertex (3, 3)
    assert!(x(0).iter().all(|v| v.abs() < 1e-6));
    assert!(x(2).iter().all(|v| (v - 3.0).abs() < 1e-6));
}

#[test]
fn estimate_is_reproducible_and_leaves_config_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "rhs.json", SMALL_RHS);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = imop(&["estimate", "--config", &cfg, "--seed", "7"], dir);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(result_line(&o)["estimation_error"].as_f64().is_some());
    }
    for f in ["rhs.csv", "rhs.json", "rhs_table.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(fs::read_to_string(&cfg).unwrap(), SMALL_RHS);
    let report: Value = serde_json::from_str(&fs::read_to_string(a.join("rhs.json")).unwrap()).unwrap();
    assert_eq!(report["rows"][0]["seed"], 7);
}

#[test]
fn estimate_rejects_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.json", &SMALL_RHS.replace("[6]", "[6, 11]"));
    assert_eq!(imop(&["estimate", "--config", &cfg], tmp.path()).status.code(), Some(1));
}

#[test]
fn replicate_writes_a_grid_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "t.json",
        r#"{"name":"grid","fixture":"mqp-rhs","n":[5,10],"k":[6,11],
            "estimator":{"kind":"clustering","config":{"kmeans_restarts":3,"fit":{"random_starts":1}}}}"#,
    );
    let o = imop(&["replicate", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(result_line(&o)["rows"], 4);
    let table = fs::read_to_string(tmp.path().join("grid_table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "K\\N,5,10");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("6,") && lines[2].starts_with("11,"));
}

#[test]
fn export_model_writes_lp_and_certificate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e.json", r#"{"fixture":"mqp-rhs","model":"mqp-rhs","n":2,"k":2}"#);
    let o = imop(&["export-model", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(result_line(&o)["plug_in_pass"], true);
    let lp = fs::read_to_string(tmp.path().join("mqp-rhs_2_2.lp")).unwrap();
    assert!(lp.contains("Subject To") && lp.trim_end().ends_with("End"));
}

#[test]
fn test_ident_reports_z() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "i.json",
        r#"{"fixture":"mlp-triobj","theta_hat":"reported","ident":{"n_prime":30,"k_prime":30,"starts":1,"max_evals":60}}"#,
    );
    let o = imop(&["test-ident", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(result_line(&o)["z_test"].as_f64().unwrap() >= 0.0);
}

#[test]
fn intro_demo_runs_without_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "d.json", r#"{"samples":200,"k":11}"#);
    let o = imop(&["intro-demo", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mean = result_line(&o)["mean"].as_array().unwrap().clone();
    assert!((mean[0].as_f64().unwrap() - 0.375).abs() < 1e-2);
}
