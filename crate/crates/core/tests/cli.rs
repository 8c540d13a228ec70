use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qsample(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsample"))
        .args(args)
        .env("QSAMPLE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn chain_from_ladder_and_file() {
    let v = json(&qsample(&["chain", "--ladder", "2x2", "--beta", "0.3", "--lazy"]));
    assert!(v["delta"].as_f64().unwrap() > 0.0);
    assert_eq!(v["config"]["lazy"], true);
    assert!(v["seed"].is_u64());

    let dir = tempfile::tempdir().unwrap();
    let two = write(dir.path(), "two_state.json", r#"{"n": 2, "P": [[0.5, 0.5], [0.5, 0.5]]}"#);
    let v = json(&qsample(&["chain", "--file", &two]));
    assert!((v["delta"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let bad = write(dir.path(), "bad.json", r#"{"n": 2, "P": [[0.5, 0.6], [0.5, 0.5]]}"#);
    let out = qsample(&["chain", "--file", &bad]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("row-stochastic"));

    let broken = write(dir.path(), "broken.json", "{\"n\": 2,\n\"P\": [[0.5, 0.5],\n[0.5 0.5]]}");
    let out = qsample(&["chain", "--file", &broken]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn anneal_reports_and_exit_codes() {
    let v = json(&qsample(&["anneal", "--ladder", "2x2", "--betas", "0,0.3,0.6,0.9,1.2", "--eps", "0.1"]));
    let r = &v["report"];
    assert!(r["final_d_tr"].as_f64().unwrap() <= 0.1);
    assert_eq!(r["ancilla_count"], 1);
    assert_eq!(r["stages"].as_array().unwrap().len(), 4);

    let loose = json(&qsample(&["anneal", "--ladder", "2x2", "--eps", "0.9999"]));
    assert!(loose["report"]["total_queries"].as_u64() <= r["total_queries"].as_u64());

    let exact = json(&qsample(&["anneal", "--ladder", "2x2", "--eps", "0.01", "--mode", "exact"]));
    assert_eq!(exact["report"]["mode"], "exact");

    let csv = qsample(&["anneal", "--ladder", "2x2", "--csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("eps,total_queries,final_d_tr,ancilla_count\n0.1,"));

    let out = qsample(&["anneal", "--ladder", "2x4", "--betas", "0,50"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage 0"));

    assert!(!qsample(&["anneal", "--mode", "fuzzy"]).status.success());
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"ladder": "2x2", "eps": 0.05, "betas": [0, 0.6]}"#);
    let v = json(&qsample(&["--config", &cfg, "anneal", "--eps", "0.2"]));
    assert_eq!(v["config"]["eps"], 0.2);
    assert_eq!(v["config"]["betas"], serde_json::json!([0.0, 0.6]));
    assert_eq!(v["report"]["ell"], 1);

    let typo = write(dir.path(), "typo.json", r#"{"epsilon": 0.1}"#);
    assert_eq!(qsample(&["--config", &typo, "anneal"]).status.code(), Some(2));
}

#[test]
fn benchmark_csv() {
    let out = qsample(&["benchmark"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "log10_inv_eps,our_queries,wocjan_queries,our_ancillas,wocjan_ancillas");
    assert_eq!(lines.len(), 7);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(3) == Some("1")));

    let one = String::from_utf8(qsample(&["benchmark", "--eps-grid", "0.01"]).stdout).unwrap();
    assert_eq!(one.lines().count(), 2);

    let fast = qsample(&["benchmark", "--ladder", "2x2", "--eps-grid", "0.1,0.01"]).stdout;
    let full = qsample(&["benchmark", "--ladder", "2x2", "--eps-grid", "0.1,0.01", "--sweep", "full"]).stdout;
    assert_eq!(fast, full);
}

#[test]
fn gibbs_command() {
    let v = json(&qsample(&["gibbs", "--ladder", "2x2", "--eps", "0.1"]));
    assert_eq!(v["schedule"]["pass"], true);
    let r = &v["report"];
    assert!(r["final_tvd"].as_f64().unwrap() <= r["final_d_tr"].as_f64().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", r#"{"rows": 2, "cols": 4, "betas": [0, 50], "eps": 0.1}"#);
    let out = qsample(&["gibbs", "--model", &model, "--verify-only"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schedule"]["pass"], false);

    let v = json(&qsample(&["gibbs", "--betas", "0"]));
    assert_eq!(v["report"]["total_queries"], 0);
}

#[test]
fn small_commands() {
    let v = json(&qsample(&["filter", "--delta", "1.0471975511965976", "--eps", "0.01"]));
    assert_eq!(v["filter"]["d"], 5);
    let v = json(&qsample(&["fpaa-angles", "--p-lower", "0.25", "--eps-fp", "0.1"]));
    assert_eq!(v["schedule"]["L"], 7);
    assert!(v["max_trace_distance"].as_f64().unwrap() <= 0.1);
    let v = json(&qsample(&["walk", "--ladder", "2x1", "--beta", "0.5", "--lazy"]));
    assert!(v["phase_gap"].as_f64().unwrap() > 0.0);
    let v = json(&qsample(&["gadget-check", "--ladder", "2x1", "--lazy", "--eps-w", "0.01"]));
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn verify_is_deterministic() {
    let a = qsample(&["verify", "--suite", "prop1", "--trials", "20"]);
    let v = json(&a);
    let checks = v["suites"][0]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 20);
    assert!(checks.iter().all(|c| c["value"].as_f64().unwrap() <= 1.0));
    let b = qsample(&["verify", "--suite", "prop1", "--trials", "20"]);
    assert_eq!(a.stdout, b.stdout);

    let v = json(&qsample(&["verify", "--suite", "fpaa", "--p-grid", "50"]));
    assert_eq!(v["suites"][0]["checks"].as_array().unwrap().len(), 12 * 50);

    let v = json(&qsample(&["verify", "--trials", "5"]));
    assert_eq!(v["pass"], true);
    assert_eq!(v["suites"].as_array().unwrap().len(), 6);

    let out = qsample(&["verify", "--suite", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_file_and_threads_env() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.csv");
    let out = qsample(&["benchmark", "--ladder", "2x1", "--eps-grid", "0.1", "--out", path.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("log10_inv_eps"));

    let out = Command::new(env!("CARGO_BIN_EXE_qsample"))
        .args(["filter", "--delta", "1", "--eps", "0.1"])
        .env("QSAMPLE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
