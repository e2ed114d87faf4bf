use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::Value;

use procflow::providers::mock::TableEmbedder;
use procflow::qa::{evaluate_run, EvalConfig, QAPair};

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/qa_golden").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn close(got: &Value, want: &Value, path: &str) {
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            assert!((a - b).abs() < 1e-9, "{path}: {a} vs {b}");
        }
        (Value::Object(a), Value::Object(b)) => {
            assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>(), "{path}");
            for (k, v) in a {
                close(v, &b[k], &format!("{path}.{k}"));
            }
        }
        _ => assert_eq!(got, want, "{path}"),
    }
}

#[test]
fn evaluation_matches_golden_report() {
    let manifest: Vec<QAPair> = fixture("manifest.jsonl").lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let answers: Vec<(String, String)> = fixture("answers.jsonl")
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            (v["id"].as_str().unwrap().to_string(), v["answer"].as_str().unwrap().to_string())
        })
        .collect();
    let vectors: BTreeMap<String, Vec<f64>> = serde_json::from_str(&fixture("vectors.json")).unwrap();
    let mut embedder = TableEmbedder::new();
    for (t, v) in &vectors {
        embedder.insert(t.clone(), v);
    }
    let report = evaluate_run("golden", &answers, &manifest, &embedder, &EvalConfig::default()).unwrap();
    let want: Value = serde_json::from_str(&fixture("report.json")).unwrap();
    close(&serde_json::to_value(&report).unwrap(), &want, "report");
}
