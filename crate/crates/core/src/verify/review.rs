use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compare::{ClipKey, ComparisonResult, DiffVerdict};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// One reviewable unit: a single variation verdict of one clip pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub item_id: String,
    pub pair_id: String,
    pub action_class: String,
    pub variation: String,
    pub clip_a: ReviewClip,
    pub clip_b: ReviewClip,
    pub model: DiffVerdict,
    pub model_detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewClip {
    #[serde(flatten)]
    pub key: ClipKey,
    pub title: String,
    pub frames: Vec<String>,
}

/// Every non-error variation verdict becomes an item `<pair>-v<index>`.
pub fn review_pool(results: &[ComparisonResult], corpus: &Corpus) -> Vec<ReviewItem> {
    let title = |v: &str| corpus.videos.get(v).map(|r| r.title.clone()).unwrap_or_default();
    let mut out = Vec::new();
    for r in results {
        for (i, v) in r.verdicts.iter().enumerate() {
            let Some(model) = &v.verdict else { continue };
            out.push(ReviewItem {
                item_id: format!("{}-v{i}", r.pair_id),
                pair_id: r.pair_id.clone(),
                action_class: r.action_class.clone(),
                variation: v.variation.clone(),
                clip_a: ReviewClip {
                    key: r.clip_a.clone(),
                    title: title(&r.clip_a.video_id),
                    frames: v.frames_a.clone(),
                },
                clip_b: ReviewClip {
                    key: r.clip_b.clone(),
                    title: title(&r.clip_b.video_id),
                    frames: v.frames_b.clone(),
                },
                model: model.clone(),
                model_detected: model.detected(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Confirmed,
    Rejected,
    Unsure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewSession {
    pub session_id: String,
    pub seed: u64,
    pub annotators: Vec<String>,
    /// Sampled items in pool order.
    pub items: Vec<String>,
    pub assignments: BTreeMap<String, String>,
}

impl ReviewSession {
    pub fn assignee(&self, item_id: &str) -> Option<&str> {
        self.assignments.get(item_id).map(String::as_str)
    }

    pub fn items_of<'a>(&'a self, annotator: &'a str) -> impl Iterator<Item = &'a String> + 'a {
        self.items.iter().filter(move |i| self.assignee(i) == Some(annotator))
    }
}

pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Seeded sample without replacement, assigned round-robin.
pub fn create_review_session(
    session_id: &str,
    pool: &[String],
    sample_size: usize,
    annotators: &[String],
    seed: u64,
) -> Result<ReviewSession> {
    if !valid_session_id(session_id) {
        return Err(Error::Validation(format!("invalid session id {session_id:?}")));
    }
    if annotators.is_empty() {
        return Err(Error::Validation("at least one annotator is required".into()));
    }
    let distinct: BTreeSet<&String> = annotators.iter().collect();
    if distinct.len() != annotators.len() || annotators.iter().any(|a| a.trim().is_empty()) {
        return Err(Error::Validation("annotator ids must be distinct and nonempty".into()));
    }
    let mut sorted: Vec<&String> = pool.iter().collect();
    sorted.sort();
    sorted.dedup();
    if sample_size > sorted.len() {
        return Err(Error::Validation(format!(
            "sample of {sample_size} requested from a pool of {}",
            sorted.len()
        )));
    }
    if sample_size == 0 {
        return Err(Error::Validation("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = rand::seq::index::sample(&mut rng, sorted.len(), sample_size).into_vec();
    picks.sort_unstable();
    let items: Vec<String> = picks.into_iter().map(|i| sorted[i].clone()).collect();
    let assignments = items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.clone(), annotators[i % annotators.len()].clone()))
        .collect();
    Ok(ReviewSession {
        session_id: session_id.to_string(),
        seed,
        annotators: annotators.to_vec(),
        items,
        assignments,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub item_id: String,
    pub annotator: String,
    pub verdict: Verdict,
    /// Milliseconds since the Unix epoch.
    pub at_ms: u64,
}

/// Check a verdict against the session's assignments.
pub fn check_verdict(session: &ReviewSession, item_id: &str, annotator: &str) -> Result<()> {
    match session.assignee(item_id) {
        None => Err(Error::NotFound(format!("item {item_id} in session {}", session.session_id))),
        Some(a) if a != annotator => Err(Error::Authorization(format!(
            "item {item_id} is not assigned to {annotator}"
        ))),
        Some(_) => Ok(()),
    }
}

pub fn record_verdict(
    session: &ReviewSession,
    log: &mut Vec<VerdictEntry>,
    item_id: &str,
    annotator: &str,
    verdict: Verdict,
    at_ms: u64,
) -> Result<()> {
    check_verdict(session, item_id, annotator)?;
    log.push(VerdictEntry {
        item_id: item_id.to_string(),
        annotator: annotator.to_string(),
        verdict,
        at_ms,
    });
    Ok(())
}

/// Latest entry per item wins.
pub fn effective_verdicts(log: &[VerdictEntry]) -> BTreeMap<String, Verdict> {
    log.iter().map(|e| (e.item_id.clone(), e.verdict)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryAccuracy {
    pub category: String,
    pub confirmed: usize,
    pub rejected: usize,
    pub unsure: usize,
    /// confirmed / (confirmed + rejected) in percent, 2 dp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incorrect_pct: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub categories: Vec<CategoryAccuracy>,
    pub verdicts: usize,
    pub unsure: usize,
    pub unsure_pct: f64,
}

pub const DETECTED: &str = "difference_detected";
pub const NOT_DETECTED: &str = "no_difference";

/// Accuracy split by the model's outcome. `detected` tells whether the
/// model reported a difference for an item.
pub fn session_accuracy(effective: &BTreeMap<String, Verdict>, detected: impl Fn(&str) -> bool) -> AccuracyTable {
    let mut cats = [
        CategoryAccuracy {
            category: DETECTED.into(),
            ..Default::default()
        },
        CategoryAccuracy {
            category: NOT_DETECTED.into(),
            ..Default::default()
        },
    ];
    for (item, v) in effective {
        let c = &mut cats[if detected(item) { 0 } else { 1 }];
        match v {
            Verdict::Confirmed => c.confirmed += 1,
            Verdict::Rejected => c.rejected += 1,
            Verdict::Unsure => c.unsure += 1,
        }
    }
    let mut table = AccuracyTable {
        verdicts: effective.len(),
        ..Default::default()
    };
    for mut c in cats {
        let base = c.confirmed + c.rejected;
        if base > 0 {
            c.correct_pct = Some(super::round2(100.0 * c.confirmed as f64 / base as f64));
            c.incorrect_pct = Some(super::round2(100.0 * c.rejected as f64 / base as f64));
        }
        table.unsure += c.unsure;
        if c.confirmed + c.rejected + c.unsure > 0 {
            table.categories.push(c);
        }
    }
    if table.verdicts > 0 {
        table.unsure_pct = super::round2(100.0 * table.unsure as f64 / table.verdicts as f64);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("i{i:05}")).collect()
    }

    fn people(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("ann{i}")).collect()
    }

    #[test]
    fn even_split() {
        let s = create_review_session("s1", &ids(10_000), 2000, &people(5), 42).unwrap();
        assert_eq!(s.items.len(), 2000);
        for a in &s.annotators {
            assert_eq!(s.items_of(a).count(), 400);
        }
        assert_eq!(s, create_review_session("s1", &ids(10_000), 2000, &people(5), 42).unwrap());
    }

    #[test]
    fn single_item() {
        let s = create_review_session("s1", &ids(1), 1, &people(1), 0).unwrap();
        assert_eq!(s.assignee("i00000"), Some("ann0"));
        assert!(create_review_session("s1", &ids(3), 4, &people(1), 0).is_err());
        assert!(create_review_session("../x", &ids(3), 1, &people(1), 0).is_err());
    }

    #[test]
    fn verdict_rules() {
        let s = create_review_session("s1", &ids(4), 4, &people(2), 0).unwrap();
        let mut log = Vec::new();
        let mine = s.items_of("ann0").next().unwrap().clone();
        let theirs = s.items_of("ann1").next().unwrap().clone();
        record_verdict(&s, &mut log, &mine, "ann0", Verdict::Rejected, 1).unwrap();
        record_verdict(&s, &mut log, &mine, "ann0", Verdict::Confirmed, 2).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(effective_verdicts(&log)[&mine], Verdict::Confirmed);
        assert!(matches!(
            record_verdict(&s, &mut log, &theirs, "ann0", Verdict::Confirmed, 3),
            Err(Error::Authorization(_))
        ));
        assert!(matches!(
            record_verdict(&s, &mut log, "nope", "ann0", Verdict::Confirmed, 3),
            Err(Error::NotFound(_))
        ));
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn all_unsure() {
        let eff: BTreeMap<String, Verdict> = ids(3).into_iter().map(|i| (i, Verdict::Unsure)).collect();
        let t = session_accuracy(&eff, |_| true);
        assert!(t.categories.iter().all(|c| c.correct_pct.is_none()));
        assert_eq!(t.unsure_pct, 100.0);
    }
}
