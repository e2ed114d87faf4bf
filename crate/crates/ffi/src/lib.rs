//! C ABI over procflow's deterministic core.
//!
//! Every function returns a [`PfStatus`]. On failure the message is kept per
//! thread and read with [`pf_last_error_message`]. Strings handed out by the
//! library are freed with [`pf_string_free`]; handles have their own `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use procflow::canonicalize::cluster_embeddings;
use procflow::corpus::{corpus_statistics, Corpus};
use procflow::providers::Embedding;
use procflow::qa::metrics::{bleu, rouge_l};
use procflow::text::{tokenize, StopWords};
use procflow::verify::{sample_frame_indices, ReviewStore, Verdict};
use procflow::workspace::stages::review_store;
use procflow::workspace::Workspace;
use procflow::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Validation = 3,
    Parse = 4,
    NotFound = 5,
    Dependency = 6,
    ConfigMismatch = 7,
    Provider = 8,
    Authorization = 9,
    Io = 10,
    Panic = 11,
}

impl From<&Error> for PfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Validation(_) | Error::Record { .. } | Error::Timestamp { .. } => PfStatus::Validation,
            Error::Parse { .. } | Error::Json(_) => PfStatus::Parse,
            Error::NotFound(_) => PfStatus::NotFound,
            Error::Dependency { .. } => PfStatus::Dependency,
            Error::ConfigMismatch(_) => PfStatus::ConfigMismatch,
            Error::Provider(_) => PfStatus::Provider,
            Error::Authorization(_) => PfStatus::Authorization,
            Error::Io { .. } => PfStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(PfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(PfStatus::from(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PfStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(PfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(PfStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior NULs replaced").into_raw()
}

fn json<T: serde::Serialize>(v: &T) -> Result<*mut c_char, Fail> {
    serde_json::to_string(v).map(owned_string).map_err(|e| Fail(PfStatus::Parse, e.to_string()))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next library call on the same thread.
#[no_mangle]
pub extern "C" fn pf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn pf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// DTW over a row-major `rows` x `cols` distance matrix. `out_path` must hold
/// `2 * (rows + cols - 1)` entries; it receives (row, col) pairs and
/// `out_path_len` the number of pairs.
///
/// # Safety
/// `dist` must point to `rows * cols` doubles and `out_path` to the
/// capacity above.
#[no_mangle]
pub unsafe extern "C" fn pf_dtw_align(
    dist: *const f64,
    rows: usize,
    cols: usize,
    out_cost: *mut f64,
    out_path: *mut usize,
    out_path_len: *mut usize,
) -> PfStatus {
    guard(|| {
        if dist.is_null() || out_path.is_null() {
            return Err(null("dist or out_path"));
        }
        let cost = out(out_cost, "out_cost")?;
        let len = out(out_path_len, "out_path_len")?;
        let flat = std::slice::from_raw_parts(dist, rows * cols);
        let matrix: Vec<Vec<f64>> = flat.chunks(cols.max(1)).take(rows).map(<[f64]>::to_vec).collect();
        let p = procflow::align::dtw_matrix(&matrix)?;
        let buf = std::slice::from_raw_parts_mut(out_path, 2 * (rows + cols - 1));
        for (k, (i, j)) in p.path.iter().enumerate() {
            buf[2 * k] = *i;
            buf[2 * k + 1] = *j;
        }
        *cost = p.cost;
        *len = p.path.len();
        Ok(())
    })
}

/// Sentence BLEU of `candidate` against one reference, both tokenized the
/// way QA evaluation tokenizes.
///
/// # Safety
/// String arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pf_bleu(
    candidate: *const c_char,
    reference: *const c_char,
    max_n: usize,
    out_score: *mut f64,
) -> PfStatus {
    guard(|| {
        let c = tokenize(text(candidate, "candidate")?);
        let r = tokenize(text(reference, "reference")?);
        *out(out_score, "out_score")? = bleu(&c, &[r], max_n);
        Ok(())
    })
}

/// # Safety
/// String arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pf_rouge_l(candidate: *const c_char, reference: *const c_char, out_score: *mut f64) -> PfStatus {
    guard(|| {
        let c = tokenize(text(candidate, "candidate")?);
        let r = tokenize(text(reference, "reference")?);
        *out(out_score, "out_score")? = rouge_l(&c, &r);
        Ok(())
    })
}

/// Average-linkage clustering of `n` row-major vectors of length `dim`.
/// `out_labels[i]` receives the cluster index of row i; clusters are
/// numbered by their smallest member.
///
/// # Safety
/// `vectors` must hold `n * dim` doubles and `out_labels` `n` entries.
#[no_mangle]
pub unsafe extern "C" fn pf_cluster_embeddings(
    vectors: *const f64,
    n: usize,
    dim: usize,
    threshold: f64,
    out_labels: *mut usize,
) -> PfStatus {
    guard(|| {
        if vectors.is_null() || out_labels.is_null() {
            return Err(null("vectors or out_labels"));
        }
        if dim == 0 {
            return Err(Fail(PfStatus::Validation, "dim must be positive".into()));
        }
        let flat = std::slice::from_raw_parts(vectors, n * dim);
        let embs = flat
            .chunks(dim)
            .map(|row| Embedding::normalized(row.to_vec()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Fail(PfStatus::Validation, e.to_string()))?;
        let groups = cluster_embeddings(&embs, threshold).map_err(|e| Fail(PfStatus::Validation, e.to_string()))?;
        let labels = std::slice::from_raw_parts_mut(out_labels, n);
        for (g, members) in groups.iter().enumerate() {
            for &i in members {
                labels[i] = g;
            }
        }
        Ok(())
    })
}

/// Evenly spaced frame indices. `out_indices` must hold `max_frames`
/// entries.
///
/// # Safety
/// `out_indices` must have the capacity above.
#[no_mangle]
pub unsafe extern "C" fn pf_sample_frame_indices(
    frame_count: usize,
    max_frames: usize,
    out_indices: *mut usize,
    out_len: *mut usize,
) -> PfStatus {
    guard(|| {
        if out_indices.is_null() {
            return Err(null("out_indices"));
        }
        let len = out(out_len, "out_len")?;
        let idx = sample_frame_indices(frame_count, max_frames)?;
        std::slice::from_raw_parts_mut(out_indices, max_frames)[..idx.len()].copy_from_slice(&idx);
        *len = idx.len();
        Ok(())
    })
}

/// A loaded corpus.
pub struct PfCorpus(Corpus);

/// Load a corpus root. `categories_json` is a JSON array of category
/// names, or null for none.
///
/// # Safety
/// `root` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_corpus_load(root: *const c_char, categories_json: *const c_char, out_corpus: *mut *mut PfCorpus) -> PfStatus {
    guard(|| {
        let root = PathBuf::from(text(root, "root")?);
        let cats: Vec<String> = if categories_json.is_null() {
            Vec::new()
        } else {
            serde_json::from_str(text(categories_json, "categories_json")?).map_err(|e| Fail(PfStatus::Parse, e.to_string()))?
        };
        let slot = out(out_corpus, "out_corpus")?;
        *slot = Box::into_raw(Box::new(PfCorpus(Corpus::load(&root, &cats)?)));
        Ok(())
    })
}

/// Dataset statistics as a JSON string owned by the caller.
///
/// # Safety
/// `corpus` must come from [`pf_corpus_load`].
#[no_mangle]
pub unsafe extern "C" fn pf_corpus_stats_json(corpus: *const PfCorpus, duration_bin_s: u32, out_json: *mut *mut c_char) -> PfStatus {
    guard(|| {
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        if duration_bin_s == 0 {
            return Err(Fail(PfStatus::Validation, "duration_bin_s must be positive".into()));
        }
        let slot = out(out_json, "out_json")?;
        *slot = json(&corpus_statistics(&c.0, duration_bin_s, &StopWords::default()))?;
        Ok(())
    })
}

/// # Safety
/// `corpus` must be null or come from [`pf_corpus_load`], freed once.
#[no_mangle]
pub unsafe extern "C" fn pf_corpus_free(corpus: *mut PfCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Review sessions over a workspace's comparison results.
pub struct PfReviewStore(ReviewStore);

/// # Safety
/// `workspace` must be NUL-terminated; `out_store` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_review_open(workspace: *const c_char, out_store: *mut *mut PfReviewStore) -> PfStatus {
    guard(|| {
        let ws = Workspace::open(text(workspace, "workspace")?, None)?;
        let slot = out(out_store, "out_store")?;
        *slot = Box::into_raw(Box::new(PfReviewStore(review_store(&ws)?)));
        Ok(())
    })
}

/// Create a session. `annotators_json` is a JSON array of names.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pf_review_create_session(
    store: *const PfReviewStore,
    session_id: *const c_char,
    sample_size: usize,
    annotators_json: *const c_char,
    seed: u64,
) -> PfStatus {
    guard(|| {
        let s = store.as_ref().ok_or_else(|| null("store"))?;
        let names: Vec<String> = serde_json::from_str(text(annotators_json, "annotators_json")?)
            .map_err(|e| Fail(PfStatus::Parse, e.to_string()))?;
        s.0.create(text(session_id, "session_id")?, sample_size, &names, seed)?;
        Ok(())
    })
}

/// Items assigned to `annotator` in a session, as JSON.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pf_review_items_json(
    store: *const PfReviewStore,
    session_id: *const c_char,
    annotator: *const c_char,
    out_json: *mut *mut c_char,
) -> PfStatus {
    guard(|| {
        let s = store.as_ref().ok_or_else(|| null("store"))?;
        let page = s.0.items_for(text(session_id, "session_id")?, Some(text(annotator, "annotator")?))?;
        *out(out_json, "out_json")? = json(&page)?;
        Ok(())
    })
}

/// Record a verdict: `"confirmed"`, `"rejected"` or `"unsure"`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pf_review_record(
    store: *const PfReviewStore,
    session_id: *const c_char,
    item_id: *const c_char,
    annotator: *const c_char,
    verdict: *const c_char,
) -> PfStatus {
    guard(|| {
        let s = store.as_ref().ok_or_else(|| null("store"))?;
        let v: Verdict = serde_json::from_value(serde_json::Value::String(text(verdict, "verdict")?.to_string()))
            .map_err(|_| Fail(PfStatus::Validation, "verdict must be confirmed, rejected or unsure".into()))?;
        s.0.record(
            text(session_id, "session_id")?,
            text(item_id, "item_id")?,
            text(annotator, "annotator")?,
            v,
        )?;
        Ok(())
    })
}

/// Session progress and the accuracy table as JSON.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pf_review_stats_json(store: *const PfReviewStore, session_id: *const c_char, out_json: *mut *mut c_char) -> PfStatus {
    guard(|| {
        let s = store.as_ref().ok_or_else(|| null("store"))?;
        let stats = s.0.stats(text(session_id, "session_id")?)?;
        *out(out_json, "out_json")? = json(&stats)?;
        Ok(())
    })
}

/// # Safety
/// `store` must be null or come from [`pf_review_open`], freed once.
#[no_mangle]
pub unsafe extern "C" fn pf_review_free(store: *mut PfReviewStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}
