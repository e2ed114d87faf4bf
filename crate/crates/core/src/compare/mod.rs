//! Pairwise clip comparison: propose variations per action class, find
//! the frames where each variation shows, ask a vision model which clip
//! shows more of it, then aggregate.

pub mod differencer;
pub mod frames;
pub mod pairs;
pub mod proposer;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::canonicalize::MergedSpan;
use crate::corpus::{CanonicalRecipe, Corpus, FrameEntry, Interval};
use crate::error::{Error, Result};
use crate::providers::gate::bounded_map;
use crate::providers::{ChatProvider, Embedding, EmbeddingProvider, FrameRef, VisionProvider};

pub use differencer::{parse_verdict, run_differencer, Answer, DiffVerdict, DifferencerInput};
pub use frames::{localize_frames, localize_with, top_k, FrameHit};
pub use pairs::{enumerate_pairs, pair_count, sample_combos, sample_pairs};
pub use proposer::{propose_differences, Proposal, ProposalCache};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClipKey {
    pub video_id: String,
    pub interval: Interval,
    pub biryani_type: String,
}

impl ClipKey {
    pub fn id(&self) -> String {
        format!("{}@{}", self.video_id, self.interval)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationVerdict {
    pub variation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<DiffVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Labels of the frames shown for each clip.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frames_a: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frames_b: Vec<String>,
}

impl VariationVerdict {
    pub fn ok(variation: impl Into<String>, v: DiffVerdict) -> Self {
        Self {
            variation: variation.into(),
            verdict: Some(v),
            error: None,
            frames_a: Vec::new(),
            frames_b: Vec::new(),
        }
    }

    pub fn failed(variation: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            variation: variation.into(),
            verdict: None,
            error: Some(reason.into()),
            frames_a: Vec::new(),
            frames_b: Vec::new(),
        }
    }

    pub fn detected(&self) -> bool {
        self.verdict.as_ref().is_some_and(DiffVerdict::detected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub pair_id: String,
    pub action_class: String,
    pub clip_a: ClipKey,
    pub clip_b: ClipKey,
    pub verdicts: Vec<VariationVerdict>,
    pub comparison_detected: bool,
}

impl ComparisonResult {
    pub fn new(pair_id: String, action_class: String, clip_a: ClipKey, clip_b: ClipKey, verdicts: Vec<VariationVerdict>) -> Self {
        let comparison_detected = verdicts.iter().any(VariationVerdict::detected);
        Self {
            pair_id,
            action_class,
            clip_a,
            clip_b,
            verdicts,
            comparison_detected,
        }
    }

    fn judged(&self) -> usize {
        self.verdicts.iter().filter(|v| v.verdict.is_some()).count()
    }

    fn detected_variations(&self) -> usize {
        self.verdicts.iter().filter(|v| v.detected()).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub comparisons: usize,
    /// Comparisons with at least one non-error verdict.
    pub judged_comparisons: usize,
    pub detected_comparisons: usize,
    pub comparison_detected_rate: f64,
    pub comparison_none_rate: f64,
    pub judged_variations: usize,
    pub detected_variations: usize,
    /// Mean over judged comparisons of the detected fraction of their
    /// variations.
    pub absolute_rate: f64,
    /// Detected variations over all judged variations.
    pub pooled_absolute_rate: f64,
    pub error_verdicts: usize,
    pub answers: BTreeMap<Answer, usize>,
}

pub fn aggregate_results(results: &[ComparisonResult]) -> ComparisonSummary {
    let mut s = ComparisonSummary {
        comparisons: results.len(),
        ..Default::default()
    };
    let mut fraction_sum = 0.0;
    for r in results {
        s.error_verdicts += r.verdicts.len() - r.judged();
        for v in r.verdicts.iter().filter_map(|v| v.verdict.as_ref()) {
            *s.answers.entry(v.answer).or_default() += 1;
        }
        let judged = r.judged();
        if judged == 0 {
            continue;
        }
        let detected = r.detected_variations();
        s.judged_comparisons += 1;
        s.judged_variations += judged;
        s.detected_variations += detected;
        if r.comparison_detected {
            s.detected_comparisons += 1;
        }
        fraction_sum += detected as f64 / judged as f64;
    }
    if s.judged_comparisons > 0 {
        let n = s.judged_comparisons as f64;
        s.comparison_detected_rate = s.detected_comparisons as f64 / n;
        s.comparison_none_rate = 1.0 - s.comparison_detected_rate;
        s.absolute_rate = fraction_sum / n;
        s.pooled_absolute_rate = s.detected_variations as f64 / s.judged_variations as f64;
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionVariation {
    pub action: String,
    pub step: String,
    pub comparisons: usize,
    pub detected: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChapterVariation {
    pub name: String,
    pub actions: Vec<ActionVariation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationMap {
    pub biryani_type: String,
    pub chapters: Vec<ChapterVariation>,
}

/// Per-chapter intensities for one recipe. `action_steps` maps action
/// classes to step ids; actions on unknown steps are left out.
pub fn stage_variation_map(
    results: &[ComparisonResult],
    recipe: &CanonicalRecipe,
    action_steps: &BTreeMap<String, String>,
) -> VariationMap {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in results.iter().filter(|r| r.judged() > 0) {
        let c = counts.entry(&r.action_class).or_default();
        c.0 += 1;
        c.1 += r.comparison_detected as usize;
    }
    let step_pos: BTreeMap<&str, usize> = recipe.steps.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let mut chapters: Vec<ChapterVariation> = recipe
        .chapters
        .iter()
        .map(|c| ChapterVariation {
            name: c.name.clone(),
            actions: Vec::new(),
        })
        .collect();
    let mut placed: Vec<(usize, &str, &str)> = action_steps
        .iter()
        .filter_map(|(a, s)| step_pos.get(s.as_str()).map(|&p| (p, s.as_str(), a.as_str())))
        .collect();
    placed.sort();
    for (_, step, action) in placed {
        let Some(ci) = recipe.chapters.iter().position(|c| c.steps.iter().any(|s| s == step)) else {
            continue;
        };
        let (n, d) = counts.get(action).copied().unwrap_or((0, 0));
        chapters[ci].actions.push(ActionVariation {
            action: action.to_string(),
            step: step.to_string(),
            comparisons: n,
            detected: d,
            intensity: (n > 0).then(|| d as f64 / n as f64),
        });
    }
    VariationMap {
        biryani_type: recipe.biryani_type.clone(),
        chapters,
    }
}

/// Majority step per action class over the chunks behind its spans. Ties
/// go to the earlier step in recipe order.
pub fn action_steps_from_assignments(
    spans: &[MergedSpan],
    segment_steps: &BTreeMap<String, String>,
    recipe: &CanonicalRecipe,
) -> BTreeMap<String, String> {
    let step_pos: BTreeMap<&str, usize> = recipe.steps.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let mut votes: BTreeMap<&str, BTreeMap<usize, usize>> = BTreeMap::new();
    for span in spans {
        for seg in &span.source_segment_ids {
            if let Some(&p) = segment_steps.get(seg).and_then(|s| step_pos.get(s.as_str())) {
                *votes.entry(&span.canonical_label).or_default().entry(p).or_default() += 1;
            }
        }
    }
    votes
        .into_iter()
        .filter_map(|(a, v)| {
            let best = v.iter().max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))?;
            Some((a.to_string(), recipe.steps[*best.0].id.clone()))
        })
        .collect()
}

/// One clip of an action class with its frames and any frame embeddings.
#[derive(Debug, Clone)]
pub struct ClipFrames {
    pub key: ClipKey,
    pub frames: Vec<FrameRef>,
    /// Workspace-independent names: `/frames/<video>/<file>` for image
    /// files, `embedding:<id>` otherwise.
    pub labels: Vec<String>,
    pub embeddings: Vec<Option<Embedding>>,
}

#[derive(Debug, Clone)]
pub struct ClassClips {
    pub action_class: String,
    /// Sorted by (video_id, start).
    pub clips: Vec<ClipFrames>,
}

pub fn frame_label(video_id: &str, f: &FrameEntry) -> String {
    match (&f.file, &f.embedding) {
        (Some(file), _) => format!("/frames/{video_id}/{file}"),
        (None, Some(id)) => format!("embedding:{id}"),
        (None, None) => String::new(),
    }
}

/// Group merged spans into per-class clip lists with frames attached.
pub fn class_clips(spans: &[MergedSpan], corpus: &Corpus) -> Vec<ClassClips> {
    let mut by_class: BTreeMap<&str, Vec<ClipFrames>> = BTreeMap::new();
    for s in spans {
        let (frames, labels, embeddings) = match corpus.frames.get(&s.video_id) {
            Some(store) => {
                let idx = store.frames_in(s.interval);
                (
                    idx.iter().map(|&i| store.frame_ref(i)).collect(),
                    idx.iter().map(|&i| frame_label(&s.video_id, &store.frames[i])).collect(),
                    idx.iter().map(|&i| store.embedding(i).cloned()).collect(),
                )
            }
            None => (Vec::new(), Vec::new(), Vec::new()),
        };
        by_class.entry(&s.canonical_label).or_default().push(ClipFrames {
            key: ClipKey {
                video_id: s.video_id.clone(),
                interval: s.interval,
                biryani_type: corpus.biryani_of(&s.video_id).to_string(),
            },
            frames,
            labels,
            embeddings,
        });
    }
    by_class
        .into_iter()
        .map(|(c, mut clips)| {
            clips.sort_by(|a, b| {
                (&a.key.video_id, a.key.interval.start, a.key.interval.end).cmp(&(
                    &b.key.video_id,
                    b.key.interval.start,
                    b.key.interval.end,
                ))
            });
            ClassClips {
                action_class: c.to_string(),
                clips,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    /// Pairs per action class; `None` runs every pair.
    pub max_pairs: Option<usize>,
    pub k_frames: usize,
    /// Cap on the number of action classes, largest first.
    pub max_classes: Option<usize>,
    pub max_in_flight: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            max_pairs: Some(500),
            k_frames: 2,
            max_classes: None,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairJob {
    pub pair_id: String,
    pub action_class: String,
    pub clip_a: ClipKey,
    pub clip_b: ClipKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub action_class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<Proposal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct CompareRun {
    pub proposals: Vec<ProposalRecord>,
    pub manifest: Vec<PairJob>,
    pub results: Vec<ComparisonResult>,
}

pub struct CompareProviders<'a> {
    pub chat: &'a dyn ChatProvider,
    pub vision: &'a dyn VisionProvider,
    pub embedder: &'a dyn EmbeddingProvider,
}

/// Frames of `clip` for a set of sub-actions: the union of each
/// sub-action's top-k frames, in temporal order.
fn frames_for(clip: &ClipFrames, subs: &[(String, Embedding)], k: usize) -> Result<Vec<usize>> {
    let (pos, vecs): (Vec<usize>, Vec<Embedding>) = clip
        .embeddings
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.clone().map(|e| (i, e)))
        .unzip();
    if vecs.is_empty() {
        return Err(Error::Validation(format!("clip {} has no frame embeddings", clip.key.id())));
    }
    let mut chosen = BTreeSet::new();
    for (name, text) in subs {
        let hit = localize_with(name, text, &vecs, k)?;
        chosen.extend(hit.frames.iter().map(|&i| pos[i]));
    }
    Ok(chosen.into_iter().collect())
}

fn compare_pair(
    job: &PairJob,
    a: &ClipFrames,
    b: &ClipFrames,
    proposal: &Proposal,
    sub_vecs: &BTreeMap<String, Embedding>,
    k: usize,
    vision: &dyn VisionProvider,
) -> ComparisonResult {
    let verdicts = proposal
        .variations
        .iter()
        .map(|variation| {
            let subs: Vec<(String, Embedding)> = proposal.mapping[variation]
                .iter()
                .map(|s| (s.clone(), sub_vecs[s].clone()))
                .collect();
            let context = proposal.importance_context(variation);
            let picked = frames_for(a, &subs, k).and_then(|ia| Ok((ia, frames_for(b, &subs, k)?)));
            let (ia, ib) = match picked {
                Ok(p) => p,
                Err(e) => return VariationVerdict::failed(variation, e.to_string()),
            };
            let refs = |c: &ClipFrames, idx: &[usize]| idx.iter().map(|&i| c.frames[i].clone()).collect::<Vec<_>>();
            let (fa, fb) = (refs(a, &ia), refs(b, &ib));
            let outcome = run_differencer(
                &DifferencerInput {
                    action: &proposal.action_class,
                    variation,
                    importance_context: &context,
                    frames_a: &fa,
                    frames_b: &fb,
                },
                vision,
            );
            let mut v = match outcome {
                Ok(v) => VariationVerdict::ok(variation, v),
                Err(e) => VariationVerdict::failed(variation, e.to_string()),
            };
            v.frames_a = ia.iter().map(|&i| a.labels[i].clone()).collect();
            v.frames_b = ib.iter().map(|&i| b.labels[i].clone()).collect();
            v
        })
        .collect();
    ComparisonResult::new(
        job.pair_id.clone(),
        job.action_class.clone(),
        a.key.clone(),
        b.key.clone(),
        verdicts,
    )
}

pub fn run_comparisons(
    classes: &[ClassClips],
    providers: &CompareProviders<'_>,
    cfg: &CompareConfig,
    seed: u64,
) -> Result<CompareRun> {
    if cfg.k_frames == 0 {
        return Err(Error::Validation("k_frames must be at least 1".into()));
    }
    let mut eligible: Vec<(usize, &ClassClips)> =
        classes.iter().filter(|c| c.clips.len() >= 2).enumerate().collect();
    if let Some(cap) = cfg.max_classes {
        eligible.sort_by(|x, y| y.1.clips.len().cmp(&x.1.clips.len()).then(x.0.cmp(&y.0)));
        eligible.truncate(cap);
        eligible.sort_by_key(|x| x.0);
    }

    let cache = ProposalCache::default();
    let mut run = CompareRun::default();
    let mut work: Vec<(PairJob, &ClipFrames, &ClipFrames, usize)> = Vec::new();
    let mut ready: Vec<(Proposal, BTreeMap<String, Embedding>)> = Vec::new();
    for (ci, class) in &eligible {
        let proposal = match cache.get_or_propose(&class.action_class, providers.chat) {
            Ok(p) => p,
            Err(e) => {
                run.proposals.push(ProposalRecord {
                    action_class: class.action_class.clone(),
                    proposal: None,
                    error: Some(e),
                });
                continue;
            }
        };
        let vecs = providers.embedder.embed_texts(&proposal.sub_actions)?;
        let sub_vecs: BTreeMap<String, Embedding> = proposal.sub_actions.iter().cloned().zip(vecs).collect();
        run.proposals.push(ProposalRecord {
            action_class: class.action_class.clone(),
            proposal: Some(proposal.clone()),
            error: None,
        });
        let class_seed = seed ^ (*ci as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        for (pi, (i, j)) in sample_pairs(class.clips.len(), cfg.max_pairs, class_seed).into_iter().enumerate() {
            let (a, b) = (&class.clips[i], &class.clips[j]);
            work.push((
                PairJob {
                    pair_id: format!("c{ci:04}-p{pi:05}"),
                    action_class: class.action_class.clone(),
                    clip_a: a.key.clone(),
                    clip_b: b.key.clone(),
                },
                a,
                b,
                ready.len(),
            ));
        }
        ready.push((proposal, sub_vecs));
    }
    run.results = bounded_map(&work, cfg.max_in_flight, |(job, a, b, r)| {
        let (p, v) = &ready[*r];
        compare_pair(job, a, b, p, v, cfg.k_frames, providers.vision)
    });
    run.manifest = work.into_iter().map(|w| w.0).collect();
    Ok(run)
}
