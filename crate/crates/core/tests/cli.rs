mod common;

use std::path::Path;
use std::process::Command;

use serde_json::Value;

use common::{ok, procflow, tree, BIN};

fn mock(dir: &Path) {
    let out = Command::new(BIN).args(["init-mock", "--seed", "3"]).arg(dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn err_json(out: &std::process::Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.contains("\"error\"")).unwrap_or_else(|| panic!("no error line: {stderr}"));
    serde_json::from_str(line).unwrap()
}

#[test]
fn missing_prerequisite_exits_with_dependency() {
    let dir = tempfile::tempdir().unwrap();
    mock(dir.path());
    ok(dir.path(), &["ingest"]).unwrap();
    let out = procflow(dir.path(), &["compare", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(5));
    let e = err_json(&out);
    assert_eq!(e["error"], "dependency");
    assert!(e["message"].as_str().unwrap().contains("canonicalize"), "{e}");
}

#[test]
fn config_change_requires_force() {
    let dir = tempfile::tempdir().unwrap();
    mock(dir.path());
    ok(dir.path(), &["ingest"]).unwrap();
    ok(dir.path(), &["canonicalize"]).unwrap();
    let cfg_path = dir.path().join("procflow.json");
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg["clustering"]["distance_threshold"] = 0.25.into();
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();

    let out = procflow(dir.path(), &["merge"]);
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(err_json(&out)["error"], "config_mismatch");

    let forced = procflow(dir.path(), &["--force", "merge"]);
    assert!(forced.status.success(), "{}", String::from_utf8_lossy(&forced.stderr));
}

#[test]
fn invalid_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    mock(dir.path());
    let cfg_path = dir.path().join("procflow.json");
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg["clustering"]["distance_threshold"] = 3.0.into();
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out = procflow(dir.path(), &["ingest"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(err_json(&out)["error"], "validation");
}

#[test]
fn init_mock_refuses_existing_workspace() {
    let dir = tempfile::tempdir().unwrap();
    mock(dir.path());
    let out = Command::new(BIN).args(["--json-errors", "init-mock"]).arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn retrieve_marinating_chicken() {
    let dir = tempfile::tempdir().unwrap();
    mock(dir.path());
    for args in [&["ingest"][..], &["canonicalize"], &["merge"]] {
        ok(dir.path(), args).unwrap();
    }
    let report = ok(dir.path(), &["retrieve", "--query", "marinating chicken", "--k", "3"]).unwrap();
    let clips = report["summary"]["clips"].as_array().unwrap();
    let mut labels: Vec<&str> = clips.iter().map(|c| c["label"].as_str().unwrap()).collect();
    labels.dedup();
    assert_eq!(labels.len(), 3, "{report}");
    assert_eq!(labels[0], "marinating chicken");
    let scores: Vec<f64> = clips.iter().map(|c| c["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn qa_eval_without_answers_file() {
    let dir = tempfile::tempdir().unwrap();
    mock(dir.path());
    for args in [&["ingest"][..], &["canonicalize"], &["merge"], &["align"], &["qa-gen", "--seed", "1"]] {
        ok(dir.path(), args).unwrap();
    }
    let out = procflow(dir.path(), &["qa-eval", "--answers", "nope.jsonl"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(err_json(&out)["error"], "not_found");
}

#[test]
fn rerunning_a_stage_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    mock(dir.path());
    ok(dir.path(), &["ingest"]).unwrap();
    ok(dir.path(), &["canonicalize"]).unwrap();
    ok(dir.path(), &["merge"]).unwrap();
    let before = tree(&dir.path().join("derived"));
    ok(dir.path(), &["canonicalize"]).unwrap();
    ok(dir.path(), &["merge"]).unwrap();
    assert_eq!(before, tree(&dir.path().join("derived")));
}

#[test]
fn logs_are_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    mock(dir.path());
    let out = Command::new(BIN)
        .arg("--workspace")
        .arg(dir.path())
        .args(["--log-level", "info", "ingest"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.lines().count() > 0);
    for line in stderr.lines() {
        let v: Value = serde_json::from_str(line).unwrap_or_else(|e| panic!("{line}: {e}"));
        assert!(v["level"].is_string() && v["msg"].is_string(), "{line}");
    }
}
