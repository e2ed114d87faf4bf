use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{Embedding, EmbeddingProvider};
use crate::providers::embedding::dot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameHit {
    pub sub_action: String,
    /// Positions within the clip's frame list.
    pub frames: Vec<usize>,
    /// Cosine similarity per hit, descending.
    pub scores: Vec<f64>,
}

/// Indices of the `k` highest scores, ordered by (-score, index).
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

pub fn localize_with(sub_action: &str, text: &Embedding, frames: &[Embedding], k: usize) -> Result<FrameHit> {
    if frames.is_empty() {
        return Err(Error::Validation(format!("no frame embeddings to localize {sub_action:?}")));
    }
    if k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    let mut scores = Vec::with_capacity(frames.len());
    for f in frames {
        if f.dim() != text.dim() {
            return Err(Error::Validation(format!(
                "frame embedding has dimension {} but text has {}",
                f.dim(),
                text.dim()
            )));
        }
        scores.push(dot(f.as_slice(), text.as_slice()));
    }
    let hits = top_k(&scores, k);
    Ok(FrameHit {
        sub_action: sub_action.to_string(),
        scores: hits.iter().map(|&i| scores[i]).collect(),
        frames: hits,
    })
}

pub fn localize_frames(
    sub_action: &str,
    frames: &[Embedding],
    provider: &dyn EmbeddingProvider,
    k: usize,
) -> Result<FrameHit> {
    let text = provider.embed_one(sub_action)?;
    localize_with(sub_action, &text, frames, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::mock::TableEmbedder;

    #[test]
    fn hand_scores() {
        assert_eq!(top_k(&[0.1, 0.9, 0.3, 0.9, 0.2], 2), vec![1, 3]);
        assert_eq!(top_k(&[0.5], 2), vec![0]);
    }

    #[test]
    fn identical_frame_scores_one() {
        let p = TableEmbedder::new().with("frying", &[0.0, 1.0]);
        let frames = vec![Embedding::normalized(vec![0.0, 3.0]).unwrap()];
        let hit = localize_frames("frying", &frames, &p, 2).unwrap();
        assert_eq!(hit.frames, vec![0]);
        assert!((hit.scores[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_clip_is_error() {
        let p = TableEmbedder::new().with("frying", &[0.0, 1.0]);
        assert!(localize_frames("frying", &[], &p, 2).is_err());
    }
}
