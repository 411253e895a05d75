use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn moduli(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moduli"))
        .args(args)
        .env("MODULI_OUTPUT_ROOT", root)
        .current_dir(root)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is json");
    assert!(v["error"]["kind"].is_string());
    assert!(v["error"]["message"].is_string());
    v
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_MODULI: &str = r#"{
  "task": {"kind": "adding", "seq_len": 6, "eval_samples": 20},
  "model": {"hidden_dims": [8], "nonlinearity": "relu", "bias": true, "decoder_bias": true},
  "regularizer": {"mode": "moduli", "manifold": {"kind": "circle", "scale": 5.0}, "ell": 1.0, "lambda": 0.01},
  "pruning": {"enabled": true, "target_percent": 50.0, "epochs": 2},
  "optimizer": {"kind": "adam", "lr": 0.001, "grad_clip": 0.5},
  "run": {"seed": 3, "epochs": 3, "batches_per_epoch": 4, "batch_size": 4, "eval_every": 2, "output_dir": "run"}
}"#;

#[test]
fn train_eval_heatmap_lottery() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    let cfg = write_config(root, "cfg.json", SMALL_MODULI);

    let v = stdout_json(&moduli(root, &["train", &cfg]));
    assert_eq!(v["summary"]["task"], "adding");
    assert_eq!(v["summary"]["batches"], 12);
    let run = root.join("run");
    assert!(run.join("metrics.csv").exists());
    assert!(run.join("checkpoint").join("manifest.json").exists());

    let e = stdout_json(&moduli(root, &["eval", run.to_str().unwrap()]));
    assert_eq!(e["metric"], "rmse");
    assert_eq!(e["value"], v["summary"]["final_eval_metric"]);

    let h = stdout_json(&moduli(
        root,
        &["heatmap", run.to_str().unwrap(), "--layer", "0", "--ordered"],
    ));
    let csv = std::fs::read_to_string(h["heatmap"].as_str().unwrap()).unwrap();
    assert_eq!(csv.lines().count(), 8);
    assert!(csv.lines().all(|l| l.split(',').count() == 8));

    let l = stdout_json(&moduli(
        root,
        &["lottery", &cfg, "--from", run.to_str().unwrap(), "--seed", "9"],
    ));
    assert_eq!(l["summary"]["lottery"], true);
    assert!(run.join("lottery_seed9").join("summary.json").exists());
}

#[test]
fn sweep_writes_ordered_rows() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    let cfg = write_config(root, "cfg.json", SMALL_MODULI);
    let v = stdout_json(&moduli(root, &["sweep", &cfg, "--lambdas", "0,0.1", "--trials", "2"]));
    let rows = v["summary"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["lambda"], 0.0);
    assert_eq!(rows[1]["lambda"], 0.1);
    assert!(rows.iter().all(|r| r["completed"] == 2));
    let csv = std::fs::read_to_string(root.join("run").join("sweep_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn failures_emit_error_json() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();

    let missing = moduli(root, &["train", "nope.json"]);
    assert_eq!(error_json(&missing)["error"]["kind"], "io");

    let bad = write_config(
        root,
        "bad.json",
        &SMALL_MODULI.replace("\"lambda\": 0.01", "\"lambda\": -1"),
    );
    let v = error_json(&moduli(root, &["train", &bad]));
    assert_eq!(v["error"]["kind"], "invalid_config");

    let unknown = write_config(
        root,
        "unknown.json",
        &SMALL_MODULI.replace("\"seq_len\": 6", "\"seq_len\": 6, \"x\": 1"),
    );
    assert_eq!(
        error_json(&moduli(root, &["train", &unknown]))["error"]["kind"],
        "invalid_config"
    );

    let usage = moduli(root, &["train"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(error_json(&usage)["error"]["kind"], "usage");

    let no_ck = moduli(root, &["eval", root.to_str().unwrap()]);
    error_json(&no_ck);
}

#[test]
fn help_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let out = moduli(tmp.path(), &["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("heatmap"));
}
