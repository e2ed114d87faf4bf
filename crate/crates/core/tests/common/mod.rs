#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_procflow");

pub fn procflow(ws: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--workspace")
        .arg(ws)
        .args(["--log-level", "warn", "--json-errors"])
        .args(args)
        .output()
        .expect("spawn procflow")
}

pub fn ok(ws: &Path, args: &[&str]) -> Result<Value, String> {
    let out = procflow(ws, args);
    if !out.status.success() {
        return Err(format!(
            "procflow {} exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| format!("procflow {}: bad stdout: {e}", args.join(" ")))
}

/// Keep the first two easy candidates of every video.
pub fn write_curation(ws: &Path) -> Result<usize, String> {
    let text = std::fs::read_to_string(ws.join("derived/qa/easy_candidates.jsonl")).map_err(|e| e.to_string())?;
    let mut per_video: BTreeMap<String, usize> = BTreeMap::new();
    let mut keep = Vec::new();
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let video = v["video_ids"][0].as_str().unwrap_or_default().to_string();
        let n = per_video.entry(video).or_default();
        if *n < 2 {
            *n += 1;
            keep.push(v["id"].clone());
        }
    }
    let body = serde_json::json!({ "keep": keep });
    std::fs::write(ws.join("annotations/easy_curation.json"), body.to_string()).map_err(|e| e.to_string())?;
    Ok(keep.len())
}

/// A scripted "model" that answers with the first half of each gold answer.
pub fn write_answers(ws: &Path) -> Result<PathBuf, String> {
    let text = std::fs::read_to_string(ws.join("derived/qa/manifest.jsonl")).map_err(|e| e.to_string())?;
    let mut out = String::new();
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let words: Vec<&str> = v["answer"].as_str().unwrap_or_default().split_whitespace().collect();
        let half = words[..words.len().div_ceil(2)].join(" ");
        out.push_str(&serde_json::json!({"id": v["id"], "answer": half}).to_string());
        out.push('\n');
    }
    let p = ws.join("answers/halfway.jsonl");
    std::fs::create_dir_all(p.parent().unwrap()).map_err(|e| e.to_string())?;
    std::fs::write(&p, out).map_err(|e| e.to_string())?;
    Ok(p)
}

/// Every stage from `ingest` to `qa-eval` over a fresh mock workspace.
pub fn run_pipeline(ws: &Path) -> Result<(), String> {
    let init = Command::new(BIN)
        .args(["init-mock", "--seed", "11"])
        .arg(ws)
        .output()
        .map_err(|e| e.to_string())?;
    if !init.status.success() {
        return Err(String::from_utf8_lossy(&init.stderr).into_owned());
    }
    for args in [
        &["ingest"][..],
        &["stats"],
        &["canonicalize"],
        &["merge"],
        &["verify-auto"],
        &["align"],
        &["compare", "--seed", "5"],
        &["retrieve", "--query", "marinating chicken", "--k", "5"],
        &["qa-gen", "--seed", "9"],
    ] {
        ok(ws, args)?;
    }
    write_curation(ws)?;
    ok(ws, &["qa-gen", "--seed", "9"])?;
    write_answers(ws)?;
    ok(ws, &["qa-eval", "--answers", "answers/halfway.jsonl"])?;
    Ok(())
}

/// Relative path to bytes for every file under `dir`.
pub fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Naive average linkage: recompute every cluster-pair mean from the raw
/// matrix each round, merge the smallest (ties by smallest members) while it
/// is strictly under the threshold.
pub fn clustering_brute(q: &[Vec<u64>], threshold_q: u64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = (0..q.len()).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(u128, u128, (usize, usize), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let sum: u128 = clusters[a]
                    .iter()
                    .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| q[i][j] as u128)
                    .sum();
                let pairs = (clusters[a].len() * clusters[b].len()) as u128;
                let key = {
                    let (x, y) = (clusters[a][0], clusters[b][0]);
                    (x.min(y), x.max(y))
                };
                let better = match best {
                    None => true,
                    Some((bs, bp, bk, _, _)) => {
                        let (l, r) = (sum * bp, bs * pairs);
                        l < r || (l == r && key < bk)
                    }
                };
                if better {
                    best = Some((sum, pairs, key, a, b));
                }
            }
        }
        let Some((sum, pairs, _, a, b)) = best else { break };
        if sum >= threshold_q as u128 * pairs {
            break;
        }
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        clusters[a].sort_unstable();
        clusters.sort();
    }
    clusters
}

pub fn quantize(d: f64) -> u64 {
    (d.clamp(0.0, 2.0) * (1u64 << 30) as f64).round() as u64
}
