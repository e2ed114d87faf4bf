//! Transcript-to-recipe alignment and chunk-to-step assignment.

mod dtw;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{cosine_distance, cosine_similarity, Embedding};
use crate::text::{content_tokens, tokenize, StopWords};

pub use dtw::{dtw_matrix, DtwPath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub rows: Vec<String>,
    pub cols: usize,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn from_embeddings(row_ids: Vec<String>, rows: &[Embedding], cols: &[Embedding]) -> Result<Self> {
        let values = rows
            .iter()
            .map(|r| cols.iter().map(|c| cosine_similarity(r, c)).collect::<std::result::Result<Vec<_>, _>>())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self {
            rows: row_ids,
            cols: cols.len(),
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// (step index, sentence index) pairs.
    pub path: Vec<(usize, usize)>,
    pub total_cost: f64,
    /// Sentence index to step index.
    pub step_assignments: BTreeMap<usize, usize>,
}

/// Which surviving (sentence, step) pairs a chunk's keywords allow.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidatePairs {
    pub pairs: BTreeSet<(usize, usize)>,
    /// No pair survived: the chunk belongs to the misc step.
    pub route_to_misc: bool,
}

/// A (sentence, step) pair survives when at least `min_overlap` keyword
/// tokens occur in both texts. An empty keyword set keeps every pair.
pub fn coarse_filter(
    keywords: &[String],
    sentences: &[String],
    steps: &[String],
    min_overlap: usize,
    stop: &StopWords,
) -> CandidatePairs {
    let kw: BTreeSet<String> = keywords.iter().flat_map(|k| content_tokens(k, stop)).collect();
    let mut out = CandidatePairs::default();
    if kw.is_empty() {
        for si in 0..sentences.len() {
            for ti in 0..steps.len() {
                out.pairs.insert((si, ti));
            }
        }
        out.route_to_misc = out.pairs.is_empty();
        return out;
    }
    let hits = |text: &str| -> BTreeSet<String> {
        tokenize(text).into_iter().filter(|t| kw.contains(t)).collect()
    };
    let step_hits: Vec<BTreeSet<String>> = steps.iter().map(|s| hits(s)).collect();
    for (si, s) in sentences.iter().enumerate() {
        let sh = hits(s);
        if sh.is_empty() {
            continue;
        }
        for (ti, th) in step_hits.iter().enumerate() {
            if sh.intersection(th).count() >= min_overlap.max(1) {
                out.pairs.insert((si, ti));
            }
        }
    }
    out.route_to_misc = out.pairs.is_empty();
    out
}

pub fn distance_matrix(steps: &[Embedding], sentences: &[Embedding]) -> Result<Vec<Vec<f64>>> {
    steps
        .iter()
        .map(|a| {
            sentences
                .iter()
                .map(|b| cosine_distance(a, b).map_err(Error::from))
                .collect()
        })
        .collect()
}

/// DTW over cosine distances between recipe steps and transcript sentences.
/// Each sentence is assigned the step it is paired with at the lowest
/// distance along the path, earlier steps winning ties.
pub fn dtw_align(steps: &[Embedding], sentences: &[Embedding]) -> Result<AlignmentResult> {
    let dist = distance_matrix(steps, sentences)?;
    let DtwPath { path, cost } = dtw_matrix(&dist)?;
    let mut step_assignments: BTreeMap<usize, usize> = BTreeMap::new();
    for &(i, j) in &path {
        match step_assignments.get(&j) {
            Some(&k) if dist[k][j] <= dist[i][j] => {}
            _ => {
                step_assignments.insert(j, i);
            }
        }
    }
    Ok(AlignmentResult {
        path,
        total_cost: cost,
        step_assignments,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkInput {
    pub segment_id: String,
    pub start_s: u32,
    pub actions: Vec<Embedding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkAssignment {
    pub segment: String,
    pub step: String,
    pub confidence: f64,
    pub rank: usize,
}

/// Best step per chunk by maximum action-to-step cosine; ranks are dense and
/// 1-based within each step, ordered by confidence then start time.
/// Chunks without actions, or listed in `misc_only`, go to the misc step
/// with confidence 0.
pub fn assign_chunks(
    chunks: &[ChunkInput],
    steps: &[Embedding],
    step_ids: &[String],
    misc_index: usize,
    misc_only: &BTreeSet<String>,
) -> Result<Vec<ChunkAssignment>> {
    if steps.len() != step_ids.len() || misc_index >= steps.len() {
        return Err(Error::Validation("step ids and embeddings disagree".into()));
    }
    let mut rows: Vec<(usize, f64, u32, &str)> = Vec::with_capacity(chunks.len());
    for c in chunks {
        if c.actions.is_empty() || misc_only.contains(&c.segment_id) {
            rows.push((misc_index, 0.0, c.start_s, &c.segment_id));
            continue;
        }
        let mut best = (0usize, f64::NEG_INFINITY);
        for (si, s) in steps.iter().enumerate() {
            let mut conf = f64::NEG_INFINITY;
            for a in &c.actions {
                conf = conf.max(cosine_similarity(a, s)?);
            }
            if conf > best.1 {
                best = (si, conf);
            }
        }
        rows.push((best.0, best.1, c.start_s, &c.segment_id));
    }
    let mut by_step: BTreeMap<usize, Vec<(f64, u32, &str)>> = BTreeMap::new();
    for (s, conf, start, id) in rows {
        by_step.entry(s).or_default().push((conf, start, id));
    }
    let mut out = Vec::with_capacity(chunks.len());
    for (s, mut items) in by_step {
        items.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2)));
        for (rank, (conf, _, id)) in items.into_iter().enumerate() {
            out.push(ChunkAssignment {
                segment: id.to_string(),
                step: step_ids[s].clone(),
                confidence: conf,
                rank: rank + 1,
            });
        }
    }
    Ok(out)
}

/// Serialized per-video alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentExport {
    pub video_id: String,
    pub path: Vec<[usize; 2]>,
    pub cost: f64,
    pub assignments: Vec<ChunkAssignment>,
    pub steps: Vec<String>,
    pub similarity: SimilarityMatrix,
}
