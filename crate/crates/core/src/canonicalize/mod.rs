//! Canonical action classes and temporal merging of repeated actions.

pub mod agglomerative;
mod merge;
mod refine;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Interval};
use crate::error::{Error, Result};
use crate::providers::{Embedding, EmbeddingProvider};

pub use agglomerative::{cluster_embeddings, quantize};
pub use merge::{labeled_segments, merge_consecutive, merge_spans, LabeledSegment, MergedSpan};
pub use refine::{refine_cluster, RefineOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    #[default]
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub distance_threshold: f64,
    pub linkage: Linkage,
    /// Ask the chat model whether each multi-phrase cluster should split.
    pub refine: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            distance_threshold: 0.3,
            linkage: Linkage::Average,
            refine: false,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_threshold > 0.0 && self.distance_threshold <= 2.0) {
            return Err(Error::Validation(format!(
                "distance_threshold must lie in (0, 2], got {}",
                self.distance_threshold
            )));
        }
        Ok(())
    }
}

/// One timestamped occurrence of an action class.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Clip {
    pub url: String,
    pub timestamp: Interval,
    pub biryani: String,
    pub video: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionCluster {
    pub canonical_label: String,
    pub phrases: Vec<String>,
    pub clips: Vec<Clip>,
}

/// Body of one entry in the action-to-clips mapping file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub phrases: Vec<String>,
    pub clips: Vec<Clip>,
}

pub type ActionMap = BTreeMap<String, ActionEntry>;

pub fn to_action_map(clusters: &[ActionCluster]) -> ActionMap {
    clusters
        .iter()
        .map(|c| {
            (
                c.canonical_label.clone(),
                ActionEntry {
                    phrases: c.phrases.clone(),
                    clips: c.clips.clone(),
                },
            )
        })
        .collect()
}

pub fn from_action_map(map: ActionMap) -> Vec<ActionCluster> {
    map.into_iter()
        .map(|(label, e)| ActionCluster {
            canonical_label: label,
            phrases: e.phrases,
            clips: e.clips,
        })
        .collect()
}

/// Member with the highest mean cosine similarity to all members (itself
/// counted as exactly 1). Means within 1e-12 tie; ties go to the shorter
/// phrase, then the lexicographically smaller one.
pub fn representative_phrase(members: &[(String, Embedding)]) -> Option<String> {
    const EPS: f64 = 1e-12;
    let n = members.len() as f64;
    let mut best: Option<(f64, &str)> = None;
    for (i, (p, e)) in members.iter().enumerate() {
        let total: f64 = members
            .iter()
            .enumerate()
            .map(|(j, (_, f))| if i == j { 1.0 } else { crate::providers::embedding::dot(e.as_slice(), f.as_slice()) })
            .sum();
        let mean = total / n;
        let wins = match best {
            None => true,
            Some((bm, bp)) => {
                if mean > bm + EPS {
                    true
                } else if mean < bm - EPS {
                    false
                } else {
                    (p.chars().count(), p.as_str()) < (bp.chars().count(), bp)
                }
            }
        };
        if wins {
            best = Some((mean, p));
        }
    }
    best.map(|(_, p)| p.to_string())
}

const EMBED_BATCH: usize = 256;

pub fn embed_all(texts: &[String], provider: &dyn EmbeddingProvider) -> Result<Vec<Embedding>> {
    let mut out = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(EMBED_BATCH) {
        let got = provider.embed_texts(chunk)?;
        if got.len() != chunk.len() {
            return Err(crate::providers::ProviderError::Response(format!(
                "{} vectors for {} texts",
                got.len(),
                chunk.len()
            ))
            .into());
        }
        out.extend(got);
    }
    Ok(out)
}

/// Deduplicate and sort, then cluster. Returned clusters carry no clips and
/// are ordered by their smallest phrase.
pub fn cluster_actions(
    phrases: &[String],
    provider: &dyn EmbeddingProvider,
    cfg: &ClusteringConfig,
) -> Result<Vec<ActionCluster>> {
    cfg.validate()?;
    let unique: Vec<String> = phrases.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if unique.is_empty() {
        return Ok(Vec::new());
    }
    let vectors = embed_all(&unique, provider)?;
    clusters_from_vectors(&unique, &vectors, cfg.distance_threshold)
}

pub(crate) fn clusters_from_vectors(
    phrases: &[String],
    vectors: &[Embedding],
    threshold: f64,
) -> Result<Vec<ActionCluster>> {
    let groups = cluster_embeddings(vectors, threshold)?;
    Ok(groups
        .into_iter()
        .map(|g| {
            let members: Vec<(String, Embedding)> =
                g.iter().map(|&i| (phrases[i].clone(), vectors[i].clone())).collect();
            ActionCluster {
                canonical_label: representative_phrase(&members).expect("nonempty group"),
                phrases: g.iter().map(|&i| phrases[i].clone()).collect(),
                clips: Vec::new(),
            }
        })
        .collect())
}

/// Append `?t=` or `&t=` to a video URL.
pub fn timestamped_url(base: &str, start: u32) -> String {
    if base.is_empty() {
        return String::new();
    }
    let sep = if base.contains('?') { '&' } else { '?' };
    format!("{base}{sep}t={start}s")
}

/// Attach every segment that mentions one of a cluster's phrases as a clip.
pub fn attach_clips(clusters: &mut [ActionCluster], corpus: &Corpus) {
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (ci, c) in clusters.iter().enumerate() {
        for p in &c.phrases {
            owner.insert(p.as_str(), ci);
        }
    }
    let mut clips: Vec<BTreeSet<Clip>> = vec![BTreeSet::new(); clusters.len()];
    for seg in &corpus.segments {
        for a in &seg.actions {
            if let Some(&ci) = owner.get(a.as_str()) {
                let url = if seg.url.is_empty() {
                    let base = corpus.videos.get(&seg.video_id).map(|v| v.url.as_str()).unwrap_or("");
                    timestamped_url(base, seg.timestamp.start)
                } else {
                    seg.url.clone()
                };
                clips[ci].insert(Clip {
                    url,
                    timestamp: seg.timestamp,
                    biryani: corpus.biryani_of(&seg.video_id).to_string(),
                    video: seg.video_id.clone(),
                });
            }
        }
    }
    for (c, set) in clusters.iter_mut().zip(clips) {
        let mut v: Vec<Clip> = set.into_iter().collect();
        v.sort_by(|a, b| (&a.video, a.timestamp).cmp(&(&b.video, b.timestamp)));
        c.clips = v;
    }
}

/// Phrase to canonical label lookup.
pub fn label_lookup(clusters: &[ActionCluster]) -> BTreeMap<String, String> {
    clusters
        .iter()
        .flat_map(|c| c.phrases.iter().map(move |p| (p.clone(), c.canonical_label.clone())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::mock::TableEmbedder;

    fn e(v: &[f64]) -> Embedding {
        Embedding::normalized(v.to_vec()).unwrap()
    }

    #[test]
    fn singleton_cluster() {
        let t = TableEmbedder::new().with("stirring rice", &[1.0, 0.0]);
        let c = cluster_actions(&["stirring rice".into()], &t, &ClusteringConfig::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].canonical_label, "stirring rice");
    }

    #[test]
    fn duplicates_collapse() {
        let t = TableEmbedder::new().with("a", &[1.0, 0.0]).with("b", &[1.0, 0.0]).with("c", &[0.0, 1.0]);
        let c = cluster_actions(
            &["c".into(), "a".into(), "b".into(), "a".into()],
            &t,
            &ClusteringConfig::default(),
        )
        .unwrap();
        let parts: Vec<_> = c.iter().map(|c| c.phrases.clone()).collect();
        assert_eq!(parts, vec![vec!["a".to_string(), "b".into()], vec!["c".into()]]);
    }

    #[test]
    fn medoid_prefers_shorter_on_tie() {
        let m = vec![
            ("stirring rice and water with a wooden spoon".to_string(), e(&[1.0, 0.2])),
            ("stirring rice".to_string(), e(&[1.0, -0.2])),
        ];
        assert_eq!(representative_phrase(&m).unwrap(), "stirring rice");
    }

    #[test]
    fn medoid_matches_brute_force() {
        let m = vec![
            ("x".to_string(), e(&[1.0, 0.0, 0.0])),
            ("yy".to_string(), e(&[0.8, 0.6, 0.0])),
            ("zzz".to_string(), e(&[0.0, 1.0, 0.0])),
        ];
        // means: x (1+.8+0)/3=.6, yy (.8+1+.6)/3=.8, zzz (0+.6+1)/3=.533
        assert_eq!(representative_phrase(&m).unwrap(), "yy");
        assert!(representative_phrase(&[]).is_none());
    }

    #[test]
    fn bad_threshold() {
        let cfg = ClusteringConfig { distance_threshold: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn url_suffix() {
        assert_eq!(timestamped_url("https://y/watch?v=x", 80), "https://y/watch?v=x&t=80s");
        assert_eq!(timestamped_url("https://y/x", 5), "https://y/x?t=5s");
    }
}
