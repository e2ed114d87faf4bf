use serde::{Deserialize, Serialize};

use crate::canonicalize::{ActionCluster, Clip};
use crate::error::{Error, Result};
use crate::providers::{cosine_similarity, EmbeddingProvider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelHit {
    pub label: String,
    pub score: f64,
    pub clips: Vec<Clip>,
}

/// Rank canonical labels against `query` and return the `k` best with their
/// clips. Equal scores fall back to label order.
pub fn retrieve_clips(
    query: &str,
    index: &[ActionCluster],
    provider: &dyn EmbeddingProvider,
    k: usize,
) -> Result<Vec<LabelHit>> {
    if k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    if index.is_empty() {
        return Ok(Vec::new());
    }
    let q = provider.embed_one(query)?;
    let labels: Vec<String> = index.iter().map(|c| c.canonical_label.clone()).collect();
    let vecs = provider.embed_texts(&labels)?;
    let mut hits = index
        .iter()
        .zip(&vecs)
        .map(|(c, v)| {
            Ok(LabelHit {
                label: c.canonical_label.clone(),
                score: cosine_similarity(&q, v)?,
                clips: c.clips.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.label.cmp(&b.label)));
    hits.truncate(k);
    Ok(hits)
}

/// One row per clip, in ranking order.
pub fn flatten_hits(hits: &[LabelHit]) -> Vec<(Clip, String, f64)> {
    hits.iter()
        .flat_map(|h| h.clips.iter().map(move |c| (c.clone(), h.label.clone(), h.score)))
        .collect()
}
