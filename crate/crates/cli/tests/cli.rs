use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const SIM: &str = r#"{
    "torus": {"d": 1, "L": 4.0, "N": 64},
    "model": {"family": "bspline", "d": 1, "k": 2, "w": 1.0},
    "beta": 0.3, "dt": 0.01, "t_total": 56.0,
    "estimators": ["log_slope", "overlap", "q2"]
}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torus-polymer"))
        .args(args)
        .current_dir(dir)
        .env("TORUS_POLYMER_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn coeffs_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "coeffs", "--family", "bspline", "--d", "1", "--k", "2", "--w", "1", "--L", "8",
            "--tol", "1e-10",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["gamma2"].as_f64().unwrap(), -0.0625);
    assert!(v["gamma4"].as_f64().unwrap() < 0.0);
    assert!(v["tail_bound"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn coeffs_from_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(
        dir.path(),
        "c.json",
        r#"{"family": "flat_spectrum", "d": 1}"#,
    );
    let out = run(
        dir.path(),
        &["coeffs", "--config", &c, "--L", "3", "--tol", "1e-10"],
    );
    let v = json(&out);
    assert!((v["gamma4"].as_f64().unwrap() + 1.0 / 24.0).abs() <= 1e-10);
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["coeffs", "--L", "8", "--d", "1", "--bogus"][..],
        &["frobnicate"][..],
        &["bridge-mc", "--lambda", "1"][..],
        &["validate", "--suite", "fast"][..],
    ] {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(64), "{args:?}: {}", stderr(&out));
    }
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let c = write_config(d, "sim.json", SIM);
    let out = run(d, &["simulate", "--config", &c, "--out", "a.csv"]);
    assert_eq!(
        out.status.code(),
        Some(64),
        "missing seed: {}",
        stderr(&out)
    );
    assert!(stderr(&out).contains("seed"));

    let hot = write_config(d, "hot.json", &SIM.replace("0.3", "1.5"));
    let out = run(
        d,
        &[
            "simulate", "--config", &hot, "--out", "b.csv", "--seed", "1",
        ],
    );
    assert_eq!(out.status.code(), Some(65));
    assert!(
        stderr(&out).contains("β must lie in [0, 1)"),
        "{}",
        stderr(&out)
    );

    let typo = write_config(d, "typo.json", &SIM.replace("\"dt\"", "\"dtt\""));
    let out = run(
        d,
        &[
            "simulate", "--config", &typo, "--out", "c.csv", "--seed", "1",
        ],
    );
    assert_eq!(out.status.code(), Some(65));

    let coarse = write_config(d, "coarse.json", &SIM.replace("\"N\": 64", "\"N\": 8"));
    let out = run(
        d,
        &[
            "simulate", "--config", &coarse, "--out", "d.csv", "--seed", "1",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(!d.join("a.csv").exists() && !d.join("manifests.jsonl").exists());
}

#[test]
fn simulate_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let c = write_config(d, "sim.json", SIM);
    let out = run(
        d,
        &[
            "simulate",
            "--config",
            &c,
            "--out",
            "runs/r.csv",
            "--seed",
            "11",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = json(&out);
    for key in [
        "gamma_log_slope",
        "gamma_overlap",
        "stderr_log_slope",
        "stderr_overlap",
    ] {
        assert!(summary[key].as_f64().unwrap().is_finite(), "{key}");
    }

    let trace = fs::read_to_string(d.join("runs/r.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("time,replica,logZ,overlap"));
    let q2_path = summary["q2_file"].as_str().unwrap();
    let q2 = fs::read_to_string(q2_path).unwrap();
    assert_eq!(q2.lines().count(), 65);

    let manifests = fs::read_to_string(d.join("manifests.jsonl")).unwrap();
    assert_eq!(manifests.lines().count(), 1);
    let m: Value = serde_json::from_str(manifests.trim()).unwrap();
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"]["t_burn"], 16.0);
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 3);
    for o in outputs {
        let bytes = fs::read(o["path"].as_str().unwrap()).unwrap();
        assert_eq!(
            o["sha256"].as_str().unwrap(),
            hex::encode(Sha256::digest(&bytes))
        );
    }

    // outputs are never overwritten
    let again = run(
        d,
        &[
            "simulate",
            "--config",
            &c,
            "--out",
            "runs/r.csv",
            "--seed",
            "11",
        ],
    );
    assert_eq!(again.status.code(), Some(64));
    assert_eq!(
        fs::read_to_string(d.join("manifests.jsonl"))
            .unwrap()
            .lines()
            .count(),
        1
    );
}

#[test]
fn simulate_reproduces_from_manifest() {
    let first = tempfile::tempdir().unwrap();
    let c = write_config(first.path(), "sim.json", SIM);
    let a = run(
        first.path(),
        &["simulate", "--config", &c, "--out", "r.csv", "--seed", "5"],
    );
    assert_eq!(a.status.code(), Some(0));
    let m: Value = serde_json::from_str(
        fs::read_to_string(first.path().join("manifests.jsonl"))
            .unwrap()
            .trim(),
    )
    .unwrap();

    let second = tempfile::tempdir().unwrap();
    let resolved = write_config(second.path(), "resolved.json", &m["config"].to_string());
    let b = run(
        second.path(),
        &["simulate", "--config", &resolved, "--out", "r.csv"],
    );
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    for name in ["r.csv", "r.q2.csv"] {
        assert_eq!(
            fs::read(first.path().join(name)).unwrap(),
            fs::read(second.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let mb: Value = serde_json::from_str(
        fs::read_to_string(second.path().join("manifests.jsonl"))
            .unwrap()
            .trim(),
    )
    .unwrap();
    assert_eq!(m["config_fingerprint"], mb["config_fingerprint"]);
}

#[test]
fn whitenoise_large_torus() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&run(
        dir.path(),
        &["whitenoise", "--beta", "1", "--L", "900"],
    ));
    let gamma = v["gamma"].as_f64().unwrap();
    assert!(
        ((gamma + 1.0 / 24.0) / (1.0 / 24.0)).abs() <= 0.02,
        "{gamma}"
    );
    assert_eq!(v["lambda"].as_f64().unwrap(), 30.0);
}

#[test]
fn green_csv_and_parseval() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "green",
            "--d",
            "1",
            "--L",
            "8",
            "--N",
            "256",
            "--out",
            "g.csv",
            "--check-parseval",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert!(v["parseval"]["identity_difference"].as_f64().unwrap() < 1e-12);
    let csv = fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x1,G"));
    assert_eq!(csv.lines().count(), 257);
}

#[test]
fn limit_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "limit",
            "--dim",
            "1",
            "--L",
            "50,100,200,400",
            "--out",
            "l.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    let csv = fs::read_to_string(dir.path().join("l.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("L,gamma4,scaled_value"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn validate_fast_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "validate",
            "--suite",
            "fast",
            "--seed",
            "7",
            "--out",
            "report.json",
        ],
    );
    let v = json(&out);
    let checks = v["checks"].as_array().unwrap();
    let ids: Vec<u64> = checks.iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, (1..=12).collect::<Vec<_>>());
    let failed: Vec<&Value> = checks.iter().filter(|c| c["status"] == "fail").collect();
    assert!(failed.is_empty(), "{failed:#?}");
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("report.json").exists());
}
