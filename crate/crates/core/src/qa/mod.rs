//! Tiered QA dataset: generation through provider prompts, curation,
//! stratified splits, statistics and answer evaluation.

pub mod eval;
pub mod metrics;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compare::sample_combos;
use crate::corpus::{Corpus, Interval, SegmentAnnotation};
use crate::error::{Error, Result};
use crate::prompts::{
    extract_json_object, render_easy, render_hard, render_medium, render_multimodal_summary, render_video_summary,
    EASY_QUESTIONS,
};
use crate::providers::gate::bounded_map;
use crate::providers::ChatProvider;

pub use eval::{evaluate_run, EvalConfig, MetricReport, MetricRow};
pub use metrics::{bertscore, bleu, lcs_len, rouge_l, BertScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Easy,
    Medium,
    Hard,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Easy, Tier::Medium, Tier::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Tier::Easy => "easy",
            Tier::Medium => "medium",
            Tier::Hard => "hard",
        }
    }
}

impl std::str::FromStr for Tier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Tier::Easy),
            "medium" => Ok(Tier::Medium),
            "hard" => Ok(Tier::Hard),
            _ => Err(Error::Validation(format!("unknown tier {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub chunk_index: usize,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub id: String,
    pub tier: Tier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_arity: Option<u8>,
    pub video_ids: Vec<String>,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<SegmentSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl QAPair {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("QA pair {}: {m}", self.id)));
        if self.answer.trim().is_empty() || self.question.trim().is_empty() {
            return bad("empty question or answer");
        }
        match self.tier {
            Tier::Hard => match self.hard_arity {
                Some(a) if (2..=5).contains(&a) && a as usize == self.video_ids.len() => Ok(()),
                _ => bad("hard pairs need an arity of 2-5 matching their videos"),
            },
            Tier::Easy if self.segment.is_none() => bad("easy pairs need a segment span"),
            _ if self.video_ids.len() != 1 || self.hard_arity.is_some() => bad("expected exactly one video"),
            _ => Ok(()),
        }
    }

    pub fn bucket(&self) -> String {
        match self.hard_arity {
            Some(a) => format!("hard{a}"),
            None => self.tier.name().to_string(),
        }
    }
}

/// Stable sub-seed for a labelled stream.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let d = Sha256::new().chain_update(seed.to_le_bytes()).chain_update(label.as_bytes()).finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// Answers from an easy reply: numbered lines `1.` to `3.`, continuation
/// lines folded into the previous answer.
pub fn parse_easy(reply: &str) -> Option<[String; 3]> {
    let mut out: [String; 3] = Default::default();
    let mut cur: Option<usize> = None;
    for line in reply.lines() {
        let l = line.trim();
        if l.is_empty() {
            continue;
        }
        let numbered = l
            .char_indices()
            .next()
            .and_then(|(_, c)| c.to_digit(10))
            .filter(|d| (1..=3).contains(d))
            .and_then(|d| {
                let rest = &l[1..];
                rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')).map(|r| (d as usize - 1, r))
            });
        match numbered {
            Some((i, rest)) => {
                cur = Some(i);
                out[i] = rest.trim().to_string();
            }
            None => {
                if let Some(i) = cur {
                    if !out[i].is_empty() {
                        out[i].push(' ');
                    }
                    out[i].push_str(l);
                }
            }
        }
    }
    out.iter().all(|a| !a.is_empty()).then_some(out)
}

/// `(Summary, [(Q, A)])` from a medium or hard reply.
pub fn parse_qa_json(reply: &str) -> Result<(String, Vec<(String, String)>)> {
    let bad = |m: &str| Error::Validation(format!("QA reply: {m}"));
    let v = extract_json_object(reply).ok_or_else(|| bad("no JSON object"))?;
    let summary = v
        .get("Summary")
        .and_then(|s| s.as_str())
        .ok_or_else(|| bad("missing Summary"))?
        .trim()
        .to_string();
    let pairs = v
        .get("QA_pairs")
        .and_then(|p| p.as_array())
        .ok_or_else(|| bad("missing QA_pairs"))?;
    let out: Vec<(String, String)> = pairs
        .iter()
        .filter_map(|p| {
            let q = p.get("Q")?.as_str()?.trim();
            let a = p.get("A")?.as_str()?.trim();
            (!q.is_empty() && !a.is_empty()).then(|| (q.to_string(), a.to_string()))
        })
        .collect();
    if out.is_empty() {
        return Err(bad("no usable QA pairs"));
    }
    Ok((summary, out))
}

/// Easy candidates for one video: up to three seeded segments, three
/// questions each. Unparseable replies skip the segment.
pub fn generate_easy(
    video_id: &str,
    segments: &[&SegmentAnnotation],
    chat: &dyn ChatProvider,
    seed: u64,
    per_video: usize,
) -> Vec<QAPair> {
    if segments.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("easy/{video_id}")));
    let mut picks = rand::seq::index::sample(&mut rng, segments.len(), per_video.min(segments.len())).into_vec();
    picks.sort_unstable();
    let mut out = Vec::new();
    for chunk in picks {
        let seg = segments[chunk];
        let answers = chat
            .chat_complete(&render_easy(&seg.description()))
            .ok()
            .and_then(|r| parse_easy(&r));
        let Some(answers) = answers else {
            log::warn!("easy QA for {} chunk {chunk}: unparseable reply, skipped", video_id);
            continue;
        };
        for (k, (q, a)) in EASY_QUESTIONS.iter().zip(answers).enumerate() {
            out.push(QAPair {
                id: format!("easy-{video_id}-{chunk:03}-{k}"),
                tier: Tier::Easy,
                hard_arity: None,
                video_ids: vec![video_id.to_string()],
                question: q.to_string(),
                answer: a,
                segment: Some(SegmentSpan {
                    chunk_index: chunk,
                    interval: seg.timestamp,
                }),
                split: None,
            });
        }
    }
    out
}

/// Keep only candidates listed in the curation file.
pub fn apply_curation(candidates: &[QAPair], keep: &BTreeSet<String>) -> Vec<QAPair> {
    let known: BTreeSet<&str> = candidates.iter().map(|p| p.id.as_str()).collect();
    for id in keep.iter().filter(|k| !known.contains(k.as_str())) {
        log::warn!("curation lists unknown easy pair {id}");
    }
    candidates.iter().filter(|p| keep.contains(&p.id)).cloned().collect()
}

fn chat_with_retry<T>(chat: &dyn ChatProvider, prompt: &str, parse: impl Fn(&str) -> Result<T>) -> Result<T> {
    let mut last = None;
    for _ in 0..2 {
        match chat.chat_complete(prompt).map_err(Error::from).and_then(|r| parse(&r)) {
            Ok(v) => return Ok(v),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("two attempts made"))
}

pub fn generate_medium(video_id: &str, summary: &str, transcript: &str, chat: &dyn ChatProvider) -> Result<Vec<QAPair>> {
    if summary.trim().is_empty() || transcript.trim().is_empty() {
        return Err(Error::Validation(format!("video {video_id} needs a summary and a transcript")));
    }
    let (_, pairs) = chat_with_retry(chat, &render_medium(summary, transcript), parse_qa_json)?;
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(k, (q, a))| QAPair {
            id: format!("medium-{video_id}-{k:02}"),
            tier: Tier::Medium,
            hard_arity: None,
            video_ids: vec![video_id.to_string()],
            question: q,
            answer: a,
            segment: None,
            split: None,
        })
        .collect())
}

/// `combo` holds (video id, multimodal summary) pairs.
pub fn generate_hard(combo_id: &str, combo: &[(String, String)], chat: &dyn ChatProvider) -> Result<Vec<QAPair>> {
    if !(2..=5).contains(&combo.len()) {
        return Err(Error::Validation(format!("hard combos take 2-5 videos, got {}", combo.len())));
    }
    if let Some((v, _)) = combo.iter().find(|(_, s)| s.trim().is_empty()) {
        return Err(Error::Validation(format!("video {v} has no summary")));
    }
    let text = combo
        .iter()
        .enumerate()
        .map(|(i, (_, s))| format!("Video {}:\n{s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n\n");
    let (_, pairs) = chat_with_retry(chat, &render_hard(&text), parse_qa_json)?;
    let arity = combo.len() as u8;
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(k, (q, a))| QAPair {
            id: format!("hard{arity}-{combo_id}-{k:02}"),
            tier: Tier::Hard,
            hard_arity: Some(arity),
            video_ids: combo.iter().map(|(v, _)| v.clone()).collect(),
            question: q,
            answer: a,
            segment: None,
            split: None,
        })
        .collect())
}

/// Stratified 50/50 split per (tier, arity) bucket. Odd buckets give the
/// extra pair to train.
pub fn split_dataset(pairs: &[QAPair], seed: u64) -> Vec<QAPair> {
    let mut buckets: BTreeMap<String, Vec<&QAPair>> = BTreeMap::new();
    for p in pairs {
        buckets.entry(p.bucket()).or_default().push(p);
    }
    let mut train = BTreeSet::new();
    for (name, mut members) in buckets {
        members.sort_by(|a, b| a.id.cmp(&b.id));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("split/{name}")));
        members.shuffle(&mut rng);
        let half = members.len().div_ceil(2);
        train.extend(members[..half].iter().map(|p| p.id.clone()));
    }
    pairs
        .iter()
        .map(|p| QAPair {
            split: Some(if train.contains(&p.id) { Split::Train } else { Split::Test }),
            ..p.clone()
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TierStats {
    pub count: usize,
    /// Share of all pairs in percent, 1 dp.
    pub pct: f64,
    pub mean_answer_words: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub tiers: BTreeMap<Tier, TierStats>,
    pub hard_arity: BTreeMap<String, usize>,
    pub splits: BTreeMap<String, SplitCounts>,
}

pub fn dataset_statistics(pairs: &[QAPair]) -> DatasetStats {
    let mut s = DatasetStats {
        total: pairs.len(),
        ..Default::default()
    };
    let mut words: BTreeMap<Tier, usize> = BTreeMap::new();
    for p in pairs {
        s.tiers.entry(p.tier).or_default().count += 1;
        *words.entry(p.tier).or_default() += p.answer.split_whitespace().count();
        if let Some(a) = p.hard_arity {
            *s.hard_arity.entry(format!("hard{a}")).or_default() += 1;
        }
        if let Some(split) = p.split {
            let c = s.splits.entry(p.bucket()).or_default();
            match split {
                Split::Train => c.train += 1,
                Split::Test => c.test += 1,
            }
        }
    }
    for (t, st) in s.tiers.iter_mut() {
        st.pct = (1000.0 * st.count as f64 / s.total as f64).round() / 10.0;
        st.mean_answer_words = words[t] as f64 / st.count as f64;
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct QaGenConfig {
    pub tiers: Vec<Tier>,
    pub easy_segments_per_video: usize,
    /// Combinations sampled per hard arity.
    pub hard_combos: BTreeMap<u8, usize>,
    pub max_in_flight: usize,
}

impl Default for QaGenConfig {
    fn default() -> Self {
        Self {
            tiers: Tier::ALL.to_vec(),
            easy_segments_per_video: 3,
            hard_combos: [(2, 4), (3, 4), (4, 2), (5, 2)].into_iter().collect(),
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub stage: String,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VideoSummaries {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multimodal: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct QaGenOutput {
    pub easy_candidates: Vec<QAPair>,
    /// Curated easy, medium and hard pairs with split labels.
    pub manifest: Vec<QAPair>,
    pub summaries: BTreeMap<String, VideoSummaries>,
    pub flags: Vec<Flag>,
}

pub fn generate_dataset(
    corpus: &Corpus,
    chat: &dyn ChatProvider,
    cfg: &QaGenConfig,
    seed: u64,
    curation: Option<&BTreeSet<String>>,
) -> Result<QaGenOutput> {
    for &a in cfg.hard_combos.keys() {
        if !(2..=5).contains(&a) {
            return Err(Error::Validation(format!("hard arity {a} is outside 2-5")));
        }
    }
    let want = |t: Tier| cfg.tiers.contains(&t);
    let videos: Vec<&String> = corpus.videos.keys().collect();
    let workers = cfg.max_in_flight;
    let mut out = QaGenOutput::default();
    let mut pairs = Vec::new();

    if want(Tier::Easy) {
        let per_video = bounded_map(&videos, workers, |v| {
            let segs: Vec<&SegmentAnnotation> = corpus.segments_of(v).iter().collect();
            generate_easy(v, &segs, chat, seed, cfg.easy_segments_per_video)
        });
        out.easy_candidates = per_video.into_iter().flatten().collect();
        match curation {
            Some(keep) => pairs.extend(apply_curation(&out.easy_candidates, keep)),
            None => {
                log::warn!("no easy curation file; easy pairs are left out of the manifest");
                out.flags.push(Flag {
                    stage: "easy".into(),
                    id: "*".into(),
                    reason: "no curation file".into(),
                });
            }
        }
    }

    let transcript = |v: &str| corpus.transcripts.get(v).map(|t| t.full_text());
    let descriptions = |v: &str| corpus.segments_of(v).iter().map(|s| s.description()).collect::<Vec<_>>();

    if want(Tier::Medium) {
        let results = bounded_map(&videos, workers, |v| -> Result<(String, Vec<QAPair>)> {
            let t = transcript(v).ok_or_else(|| Error::Validation(format!("video {v} has no transcript")))?;
            let chunks = descriptions(v);
            if chunks.is_empty() {
                return Err(Error::Validation(format!("video {v} has no segments")));
            }
            let summary = chat.chat_complete(&render_video_summary(&chunks))?;
            let qa = generate_medium(v, &summary, &t, chat)?;
            Ok((summary, qa))
        });
        for (v, r) in videos.iter().zip(results) {
            match r {
                Ok((summary, qa)) => {
                    out.summaries.entry(v.to_string()).or_default().summary = Some(summary);
                    pairs.extend(qa);
                }
                Err(e) => out.flags.push(Flag {
                    stage: "medium".into(),
                    id: v.to_string(),
                    reason: e.to_string(),
                }),
            }
        }
    }

    if want(Tier::Hard) {
        let results = bounded_map(&videos, workers, |v| -> Result<String> {
            let t = transcript(v).ok_or_else(|| Error::Validation(format!("video {v} has no transcript")))?;
            Ok(chat.chat_complete(&render_multimodal_summary(&descriptions(v).join("\n"), &t))?)
        });
        let mut pool: Vec<(String, String)> = Vec::new();
        for (v, r) in videos.iter().zip(results) {
            match r {
                Ok(s) => {
                    out.summaries.entry(v.to_string()).or_default().multimodal = Some(s.clone());
                    pool.push((v.to_string(), s));
                }
                Err(e) => out.flags.push(Flag {
                    stage: "hard-summary".into(),
                    id: v.to_string(),
                    reason: e.to_string(),
                }),
            }
        }
        let mut jobs: Vec<(String, Vec<(String, String)>)> = Vec::new();
        for (&arity, &count) in &cfg.hard_combos {
            let arity = arity as usize;
            if pool.len() < arity {
                continue;
            }
            let count = count.min(crate::compare::pairs::binomial(pool.len() as u64, arity as u64) as usize);
            let combos = sample_combos(pool.len(), arity, count, derive_seed(seed, &format!("hard{arity}")))?;
            for (ci, c) in combos.into_iter().enumerate() {
                jobs.push((format!("{ci:04}"), c.into_iter().map(|i| pool[i].clone()).collect()));
            }
        }
        let results = bounded_map(&jobs, workers, |(id, combo)| generate_hard(id, combo, chat));
        for ((id, combo), r) in jobs.iter().zip(results) {
            match r {
                Ok(qa) => pairs.extend(qa),
                Err(e) => out.flags.push(Flag {
                    stage: "hard".into(),
                    id: format!("hard{}-{id}", combo.len()),
                    reason: e.to_string(),
                }),
            }
        }
    }

    for p in &pairs {
        p.validate()?;
    }
    out.manifest = split_dataset(&pairs, seed);
    Ok(out)
}
