use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_structsparse"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json_file(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn read_vector(path: &Path) -> Vec<f64> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.parse().unwrap()).collect()
}

#[test]
fn project_clips_to_radius() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.json"), r#"{"p":2,"kind":"plain_k","k":1}"#).unwrap();
    fs::write(dir.path().join("v.csv"), "3\n-1\n").unwrap();
    let out = ok(dir.path(), &["project", "--model", "m.json", "--radius", "2", "--vector", "v.csv"]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["vector"], serde_json::json!([2.0, 0.0]));
    assert_eq!(doc["support"], serde_json::json!([0]));
    assert_eq!(doc["scaled"], Value::Bool(true));
    assert_eq!(doc["version"], Value::String(structsparse::VERSION.into()));
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn smrh_on_identity_design_is_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.json"), r#"{"p":5,"kind":"plain_k","k":1}"#).unwrap();
    let common = ["--model", "m.json", "--family", "linear", "--radius", "1"];
    let mut gen = vec!["gen"];
    gen.extend(common);
    gen.extend(["--n", "5", "--design", "identity", "--noiseless", "--out", "id.csv"]);
    ok(dir.path(), &gen);
    let mut smrh = vec!["smrh"];
    smrh.extend(common);
    smrh.extend(["--data", "id.csv", "--out", "s.json"]);
    ok(dir.path(), &smrh);
    let doc = json_file(&dir.path().join("s.json"));
    for key in ["alpha", "beta", "mu", "eta_star"] {
        assert!((doc[key].as_f64().unwrap() - 1.0).abs() <= 1e-12, "{key}: {}", doc[key]);
    }
    assert_eq!(doc["method"], "analytic");
}

#[test]
fn fit_recovers_noiseless_linear_truth() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.json"), r#"{"p":10,"kind":"plain_k","k":2}"#).unwrap();
    let common = ["--model", "m.json", "--family", "linear", "--radius", "1"];
    let mut gen = vec!["gen"];
    gen.extend(common);
    gen.extend(["--n", "40", "--design", "near-orthogonal", "--noiseless", "--seed", "11", "--out", "d.csv"]);
    ok(dir.path(), &gen);
    let mut fit = vec!["fit"];
    fit.extend(common);
    fit.extend(["--data", "d.csv", "--reference", "d_theta.csv", "--max-iters", "200", "--out", "est.csv"]);
    ok(dir.path(), &fit);

    let est = read_vector(&dir.path().join("est.csv"));
    let truth = read_vector(&dir.path().join("d_theta.csv"));
    let err: f64 = est.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    assert!(err <= 1e-6, "error {err}");

    let summary = json_file(&dir.path().join("est.json"));
    assert_eq!(summary["audit"]["status"], "holds");
    assert_eq!(summary["converged"], Value::Bool(true));
    let trace = fs::read_to_string(dir.path().join("est_trace.csv")).unwrap();
    assert!(trace.starts_with("iter,objective,eta,support_size,step_norm,dist_to_ref\n"));

    let sidecar = json_file(&dir.path().join("d.json"));
    assert_eq!(sidecar["theta_star"].as_array().unwrap().len(), 10);
    assert_eq!(sidecar["seed"], 11);
}

#[test]
fn check_reports_decomposition() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.json"), r#"{"p":6,"kind":"disjoint_groups","groups":[[0,1],[2,3],[4,5]],"active":1}"#)
        .unwrap();
    let common = ["--model", "m.json", "--family", "poisson", "--radius", "1"];
    let mut gen = vec!["gen"];
    gen.extend(common);
    gen.extend(["--n", "50", "--out", "d.csv"]);
    ok(dir.path(), &gen);
    let mut check = vec!["check"];
    check.extend(common);
    check.extend(["--data", "d.csv", "--truth", "d_theta.csv", "--out", "c.json"]);
    ok(dir.path(), &check);
    let doc = json_file(&dir.path().join("c.json"));
    assert_eq!(doc["delta2"].as_f64().unwrap(), 0.0);
    assert_eq!(doc["w_hat_certified"], Value::Bool(true));
    assert_eq!(doc["operator_bound_holds"], Value::Bool(true));
}

#[test]
fn smrh_falls_back_to_probe_over_budget() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.json"), r#"{"p":8,"kind":"plain_k","k":2}"#).unwrap();
    let common = ["--model", "m.json", "--family", "logistic", "--radius", "1"];
    let mut gen = vec!["gen"];
    gen.extend(common);
    gen.extend(["--n", "60", "--out", "d.csv"]);
    ok(dir.path(), &gen);
    let mut smrh = vec!["smrh"];
    smrh.extend(common);
    smrh.extend(["--data", "d.csv", "--cap", "3", "--trials", "50"]);
    let doc: Value = serde_json::from_slice(&ok(dir.path(), &smrh).stdout).unwrap();
    assert_eq!(doc["method"], "empirical (non-certified)");
    assert_eq!(doc["supports_examined"], 50);
}

#[test]
fn errors_are_json_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.json"), r#"{"p":3,"kind":"plain_k","k":1}"#).unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"p":3,"kind":"plain_k","k":0}"#).unwrap();
    fs::write(dir.path().join("v.csv"), "1\n2\n3\n").unwrap();

    let out = run(dir.path(), &["project", "--model", "bad.json", "--radius", "1", "--vector", "v.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["kind"].is_string());

    let out = run(dir.path(), &["project", "--model", "m.json", "--radius", "-1", "--vector", "v.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(dir.path(), &["project", "--model", "m.json", "--vector", "v.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");

    // More coordinates than samples: the restricted Gram matrices are singular.
    fs::write(dir.path().join("wide.json"), r#"{"p":6,"kind":"plain_k","k":2}"#).unwrap();
    fs::write(dir.path().join("wide.csv"), "y,x0,x1,x2,x3,x4,x5\n1,1,0,0,0,0,0\n0,0,1,0,0,0,0\n").unwrap();
    let out = run(
        dir.path(),
        &["smrh", "--model", "wide.json", "--data", "wide.csv", "--family", "linear", "--radius", "1"],
    );
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "not_identifiable");
}
