//! End-to-end runs of the `dsf` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn dsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsf")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const COMPLETE: &str = r#"{"graph": {"kind": "complete", "V": 101}, "replicas": 50, "seed": 7}"#;

#[test]
fn simulate_writes_one_row_per_replica() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "c.json", COMPLETE);
    let out_dir = dir.path().join("out");
    let out = dsf(&["simulate", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(out_dir.join("halting.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("replica,m0,T,t_last,events,seed"));
    assert_eq!(lines.count(), 50);
    assert!(!csv.contains('\r'));
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["master_seed"], 7);
    assert!(report["config_hash"].as_str().unwrap().len() == 64);
    assert!(report["tool_version"].is_string());
}

#[test]
fn config_errors_exit_two_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (r#"{"graph": {"kind": "complete", "V": 101}, "replicas": 0, "seed": 7}"#, "replicas"),
        (r#"{"graph": {"kind": "complete", "V": 101}, "replicas": 5}"#, "seed"),
        (r#"{"graph": {"kind": "complete", "V": 101}, "replicas": 5, "seed": 1, "colour": 3}"#, "colour"),
    ];
    for (i, (json, field)) in cases.iter().enumerate() {
        let config = write_config(dir.path(), &format!("bad{i}.json"), json);
        let out = dsf(&["simulate", "--config", &config, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{json}");
        assert!(stderr(&out).contains(field), "{json}: {}", stderr(&out));
    }
    let out = dsf(&["simulate", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "t.json",
        r#"{"experiment": "trace", "graph": {"kind": "complete", "V": 201}, "replicas": 12, "seed": 99,
            "time_grid": {"kind": "linear", "start": 0.0, "stop": 20.0, "points": 5}, "fano_times": [10.0]}"#,
    );
    let halting = write_config(dir.path(), "h.json", COMPLETE);
    let mut outputs = Vec::new();
    for (k, workers) in ["1", "1", "3"].iter().enumerate() {
        let a = dir.path().join(format!("t{k}"));
        let b = dir.path().join(format!("h{k}"));
        let run_t = dsf(&["simulate", "--config", &config, "--workers", workers, "--out", a.to_str().unwrap()]);
        let run_h = dsf(&["simulate", "--config", &halting, "--workers", workers, "--out", b.to_str().unwrap()]);
        assert_eq!(run_t.status.code(), Some(0), "{}", stderr(&run_t));
        assert_eq!(run_h.status.code(), Some(0), "{}", stderr(&run_h));
        outputs.push((
            fs::read(a.join("trace.csv")).unwrap(),
            fs::read(b.join("halting.csv")).unwrap(),
            fs::read(a.join("report.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let trace = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(trace.lines().count(), 1 + 12 * 5);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "c.json", COMPLETE);
    let read = |seed: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = dsf(&["simulate", "--config", &config, "--seed", seed, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        fs::read(out_dir.join("halting.csv")).unwrap()
    };
    assert_eq!(read("7", "a"), read("7", "b"));
    assert_ne!(read("7", "c"), read("8", "d"));
}

#[test]
fn analytic_values() {
    let out = dsf(&["analytic", "mu", "--p", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), r#"{"float":1.4,"p":2,"rational":"7/5"}"#);
    let v = stdout_json(&dsf(&["analytic", "mu", "--p", "5"]));
    assert_eq!(v["rational"], "219/11");
    let v = stdout_json(&dsf(&["analytic", "pdf", "--tau", "1.0"]));
    assert!((v["value"].as_f64().unwrap() - 0.591452).abs() < 1e-6);
    let v = stdout_json(&dsf(&["analytic", "mean-T", "--N", "10", "--m0", "1"]));
    assert_eq!(v["value"].as_f64().unwrap(), 10.0);
    let v = stdout_json(&dsf(&["analytic", "cumulants", "--t", "100"]));
    assert!((v["v"].as_f64().unwrap() / v["n"].as_f64().unwrap() - 1.0 / 3.0).abs() < 0.01);
}

#[test]
fn analytic_errors_exit_two() {
    for args in [
        &["analytic", "zeta", "--p", "2"][..],
        &["analytic", "mu", "--p", "0"],
        &["analytic", "pdf", "--tau", "-1"],
        &["analytic", "pdf"],
        &["analytic", "mean-T", "--N", "10"],
    ] {
        let out = dsf(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn ring_scan_writes_a_row_per_size_and_a_slope() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "s.json",
        r#"{"sweep": {"topology": {"kind": "ring"}, "sizes": [8, 12, 16]}, "replicas": 40, "seed": 3}"#,
    );
    let out = dsf(&["scan", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("size,mean_T,se_T,mean_tlast,var_T"));
    let sizes: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(sizes, ["8", "12", "16"]);
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let fits = report["fits"].as_array().unwrap();
    assert!(fits.iter().any(|f| f["fit"]["slope"].is_number()), "{fits:?}");

    let small = write_config(
        dir.path(),
        "small.json",
        r#"{"sweep": {"topology": {"kind": "ring"}, "sizes": [8, 16]}, "replicas": 40, "seed": 3}"#,
    );
    let out = dsf(&["scan", "--config", &small, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sizes"), "{}", stderr(&out));
}

#[test]
fn compare_accepts_the_right_law_and_rejects_a_wrong_one() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "k.json",
        r#"{"graph": {"kind": "complete", "V": 1001}, "replicas": 10000, "seed": 11, "fast_path": true}"#,
    );
    let run = dsf(&["simulate", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let input = dir.path().join("halting.csv");
    let out = dsf(&["compare", "--input", input.to_str().unwrap(), "--N", "1000"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["samples"], 10000);
    assert!(v["ks"]["distance"].as_f64().unwrap() < 0.02, "{}", v["ks"]);

    // Exp(1) draws are not halting times
    use rand::SeedableRng;
    use rand_distr::{Distribution, Exp};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut text = String::from("replica,m0,T,t_last,events,seed\n");
    for i in 0..2000 {
        let t: f64 = Exp::new(1.0).unwrap().sample(&mut rng);
        text.push_str(&format!("{i},1,{t},{t},1,0\n"));
    }
    let wrong = dir.path().join("exp.csv");
    fs::write(&wrong, text).unwrap();
    let v = stdout_json(&dsf(&["compare", "--input", wrong.to_str().unwrap(), "--N", "1"]));
    assert!(v["ks"]["distance"].as_f64().unwrap() > v["ks"]["critical_1"].as_f64().unwrap());

    let out = dsf(&["compare", "--input", "/nonexistent/halting.csv", "--N", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn event_ceiling_exits_three_with_partial_outputs() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "r.json",
        r#"{"graph": {"kind": "ring", "L": 64}, "replicas": 6, "seed": 2, "max_events": 50}"#,
    );
    let out = dsf(&["simulate", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(dir.path().join("halting.csv").exists());
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report["failure"].is_string());
    assert_eq!(report["replicas_requested"], 6);
}
