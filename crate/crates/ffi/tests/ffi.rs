use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use procflow_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = pf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(p: *mut std::ffi::c_char) -> String {
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    pf_string_free(p);
    s
}

#[test]
fn dtw_identity_path() {
    let d = [0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
    let mut path = [usize::MAX; 2 * 5];
    let (mut cost, mut len) = (f64::NAN, 0usize);
    let st = unsafe { pf_dtw_align(d.as_ptr(), 3, 3, &mut cost, path.as_mut_ptr(), &mut len) };
    assert_eq!(st, PfStatus::Ok);
    assert_eq!(cost, 0.0);
    assert_eq!(&path[..2 * len], &[0, 0, 1, 1, 2, 2]);
    assert!(pf_last_error_message().is_null());
}

#[test]
fn dtw_rejects_bad_input() {
    let d = [f64::NAN];
    let mut path = [0usize; 2];
    let (mut cost, mut len) = (0.0, 0usize);
    let st = unsafe { pf_dtw_align(d.as_ptr(), 1, 1, &mut cost, path.as_mut_ptr(), &mut len) };
    assert_eq!(st, PfStatus::Validation);
    assert!(last_error().contains("non-finite"));
    let st = unsafe { pf_dtw_align(ptr::null(), 1, 1, &mut cost, path.as_mut_ptr(), &mut len) };
    assert_eq!(st, PfStatus::NullPointer);
}

#[test]
fn text_metrics() {
    let mut score = 0.0;
    let a = c("the rice is soaked for thirty minutes");
    let st = unsafe { pf_bleu(a.as_ptr(), a.as_ptr(), 4, &mut score) };
    assert_eq!(st, PfStatus::Ok);
    assert!((score - 1.0).abs() < 1e-12);
    // LCS of "a b c d" and "a c e" is "a c": P = 2/4, R = 2/3, F = 4/7.
    let (x, y) = (c("a b c d"), c("a c e"));
    assert_eq!(unsafe { pf_rouge_l(x.as_ptr(), y.as_ptr(), &mut score) }, PfStatus::Ok);
    assert!((score - 4.0 / 7.0).abs() < 1e-12);
    let bad = [0xffu8, 0];
    let st = unsafe { pf_rouge_l(bad.as_ptr().cast(), y.as_ptr(), &mut score) };
    assert_eq!(st, PfStatus::InvalidUtf8);
}

#[test]
fn clustering_labels() {
    // Rows 0 and 2 are near-identical; row 1 is orthogonal to both.
    let v = [1.0, 0.0, 0.0, 1.0, 1.0, 0.05];
    let mut labels = [usize::MAX; 3];
    let st = unsafe { pf_cluster_embeddings(v.as_ptr(), 3, 2, 0.3, labels.as_mut_ptr()) };
    assert_eq!(st, PfStatus::Ok);
    assert_eq!(labels, [0, 1, 0]);
    let zero = [0.0, 0.0];
    let st = unsafe { pf_cluster_embeddings(zero.as_ptr(), 1, 2, 0.3, labels.as_mut_ptr()) };
    assert_eq!(st, PfStatus::Validation);
}

#[test]
fn frame_sampling() {
    let mut idx = [0usize; 5];
    let mut len = 0;
    assert_eq!(unsafe { pf_sample_frame_indices(9, 5, idx.as_mut_ptr(), &mut len) }, PfStatus::Ok);
    assert_eq!(&idx[..len], &[0, 2, 4, 6, 8]);
    assert_eq!(unsafe { pf_sample_frame_indices(9, 0, idx.as_mut_ptr(), &mut len) }, PfStatus::Validation);
}

#[test]
fn corpus_and_review_handles() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    procflow::workspace::mock::init_mock(root, 4).unwrap();
    let ws = procflow::workspace::Workspace::open(root, None).unwrap();
    for args in [
        procflow::workspace::StageArgs::Ingest,
        procflow::workspace::StageArgs::Canonicalize,
        procflow::workspace::StageArgs::Merge,
        procflow::workspace::StageArgs::Align,
        procflow::workspace::StageArgs::Compare { seed: 1, max_pairs: None, k_frames: None },
    ] {
        procflow::workspace::run_stage(&ws, &args, false).unwrap();
    }

    let root_c = c(root.to_str().unwrap());
    let cats = c(&serde_json::to_string(&ws.config.categories).unwrap());
    let mut corpus = ptr::null_mut();
    assert_eq!(unsafe { pf_corpus_load(root_c.as_ptr(), cats.as_ptr(), &mut corpus) }, PfStatus::Ok);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pf_corpus_stats_json(corpus, 60, &mut out) }, PfStatus::Ok);
    let stats: serde_json::Value = serde_json::from_str(&unsafe { take(out) }).unwrap();
    assert_eq!(stats["video_count"], 12);
    assert_eq!(stats["segment_count"], ws.load_corpus().unwrap().segments.len());
    unsafe { pf_corpus_free(corpus) };

    let mut store = ptr::null_mut();
    assert_eq!(unsafe { pf_review_open(root_c.as_ptr(), &mut store) }, PfStatus::Ok);
    let (sid, names) = (c("s1"), c(r#"["ann1","ann2"]"#));
    assert_eq!(unsafe { pf_review_create_session(store, sid.as_ptr(), 4, names.as_ptr(), 2) }, PfStatus::Ok);
    let ann1 = c("ann1");
    assert_eq!(unsafe { pf_review_items_json(store, sid.as_ptr(), ann1.as_ptr(), &mut out) }, PfStatus::Ok);
    let page: serde_json::Value = serde_json::from_str(&unsafe { take(out) }).unwrap();
    let item = c(page["items"][0]["item_id"].as_str().unwrap());
    let ann2 = c("ann2");
    let yes = c("confirmed");
    let st = unsafe { pf_review_record(store, sid.as_ptr(), item.as_ptr(), ann2.as_ptr(), yes.as_ptr()) };
    assert_eq!(st, PfStatus::Authorization);
    let maybe = c("maybe");
    let st = unsafe { pf_review_record(store, sid.as_ptr(), item.as_ptr(), ann1.as_ptr(), maybe.as_ptr()) };
    assert_eq!(st, PfStatus::Validation);
    let st = unsafe { pf_review_record(store, sid.as_ptr(), item.as_ptr(), ann1.as_ptr(), yes.as_ptr()) };
    assert_eq!(st, PfStatus::Ok);
    assert_eq!(unsafe { pf_review_stats_json(store, sid.as_ptr(), &mut out) }, PfStatus::Ok);
    let stats: serde_json::Value = serde_json::from_str(&unsafe { take(out) }).unwrap();
    assert_eq!(stats["log_length"], 1);
    let missing = c("nope");
    assert_eq!(unsafe { pf_review_stats_json(store, missing.as_ptr(), &mut out) }, PfStatus::NotFound);
    unsafe { pf_review_free(store) };

    let nowhere = c("/nonexistent/procflow");
    assert_eq!(unsafe { pf_review_open(nowhere.as_ptr(), &mut store) }, PfStatus::NotFound);
}

const HEADER: &str = include_str!("../include/procflow.h");

#[test]
fn header_declares_every_export() {
    let src = include_str!("../src/lib.rs");
    let exported: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 15, "{exported:?}");
    for name in exported {
        assert!(HEADER.contains(&format!("{name}(")), "{name} missing from header");
    }
    for ty in ["typedef struct PfCorpus PfCorpus;", "typedef struct PfReviewStore PfReviewStore;", "PF_STATUS_PANIC = 11"] {
        assert!(HEADER.contains(ty), "{ty}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile::tempdir().unwrap();
    let main = dir.path().join("main.c");
    std::fs::write(&main, "#include \"procflow.h\"\nint main(void) { return PF_STATUS_OK; }\n").unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&main)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
