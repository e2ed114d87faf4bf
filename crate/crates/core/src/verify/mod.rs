//! Label verification: automatic yes/no checks over sampled frames, and
//! human review sessions over comparison verdicts.

pub mod review;
pub mod server;
pub mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::canonicalize::MergedSpan;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::prompts::render_verify;
use crate::providers::gate::bounded_map;
use crate::providers::{FrameRef, VisionProvider};

pub use review::{
    create_review_session, effective_verdicts, record_verdict, review_pool, session_accuracy, AccuracyTable,
    CategoryAccuracy, ReviewItem, ReviewSession, Verdict, VerdictEntry,
};
pub use server::router;
pub use store::ReviewStore;

/// Evenly spaced frame indices, at most `max_frames` of them.
pub fn sample_frame_indices(frame_count: usize, max_frames: usize) -> Result<Vec<usize>> {
    if max_frames < 1 {
        return Err(Error::Validation("max_frames must be at least 1".into()));
    }
    if frame_count < 1 {
        return Err(Error::Validation("frame_count must be at least 1".into()));
    }
    if frame_count <= max_frames {
        return Ok((0..frame_count).collect());
    }
    if max_frames == 1 {
        return Ok(vec![0]);
    }
    let (f, k) = (frame_count - 1, max_frames - 1);
    // round(i*f/k) with halves rounded up, in integers.
    let mut out: Vec<usize> = (0..max_frames).map(|i| (2 * i * f + k) / (2 * k)).collect();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationStatus {
    Correct,
    Incorrect,
    Error,
}

/// Strict single-word parse after trimming whitespace and punctuation.
pub fn parse_yes_no(reply: &str) -> VerificationStatus {
    let word = reply
        .trim()
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace() || matches!(c, '“' | '”' | '‘' | '’'));
    if word.eq_ignore_ascii_case("yes") {
        VerificationStatus::Correct
    } else if word.eq_ignore_ascii_case("no") {
        VerificationStatus::Incorrect
    } else {
        VerificationStatus::Error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub segment_id: String,
    pub video_id: String,
    pub biryani_type: String,
    pub action: String,
    pub status: VerificationStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// What to verify: one span and the frames available for it.
#[derive(Debug, Clone)]
pub struct VerifyTarget {
    pub segment_id: String,
    pub video_id: String,
    pub biryani_type: String,
    pub action: String,
    pub frames: Vec<FrameRef>,
}

pub fn auto_verify(target: &VerifyTarget, vision: &dyn VisionProvider, max_frames: usize) -> VerificationRecord {
    let mut rec = VerificationRecord {
        segment_id: target.segment_id.clone(),
        video_id: target.video_id.clone(),
        biryani_type: target.biryani_type.clone(),
        action: target.action.clone(),
        status: VerificationStatus::Error,
        raw_response: None,
        error: None,
    };
    if target.action.trim().is_empty() {
        rec.error = Some("empty action".into());
        return rec;
    }
    let picked = match sample_frame_indices(target.frames.len(), max_frames) {
        Ok(p) => p,
        Err(e) => {
            rec.error = Some(format!("no frames: {e}"));
            return rec;
        }
    };
    let frames: Vec<FrameRef> = picked.iter().map(|&i| target.frames[i].clone()).collect();
    match vision.vision_analyze(&frames, &render_verify(&target.action)) {
        Ok(reply) => {
            rec.status = parse_yes_no(&reply);
            rec.raw_response = Some(reply);
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Targets for every merged span, in span order.
pub fn verify_targets(spans: &[MergedSpan], corpus: &Corpus) -> Vec<VerifyTarget> {
    spans
        .iter()
        .map(|s| VerifyTarget {
            segment_id: format!("{}@{}", s.video_id, s.interval),
            video_id: s.video_id.clone(),
            biryani_type: corpus.biryani_of(&s.video_id).to_string(),
            action: s.canonical_label.clone(),
            frames: corpus
                .frames
                .get(&s.video_id)
                .map(|st| st.frames_in(s.interval).into_iter().map(|i| st.frame_ref(i)).collect())
                .unwrap_or_default(),
        })
        .collect()
}

pub fn verify_all(
    targets: &[VerifyTarget],
    vision: &dyn VisionProvider,
    max_frames: usize,
    workers: usize,
) -> Vec<VerificationRecord> {
    bounded_map(targets, workers, |t| auto_verify(t, vision, max_frames))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub correct: usize,
    pub incorrect: usize,
    pub errors: usize,
    /// Correct plus incorrect; errors are reported apart.
    pub base: usize,
    pub correct_pct: f64,
    pub incorrect_pct: f64,
}

impl StatusCounts {
    fn add(&mut self, s: VerificationStatus) {
        match s {
            VerificationStatus::Correct => self.correct += 1,
            VerificationStatus::Incorrect => self.incorrect += 1,
            VerificationStatus::Error => self.errors += 1,
        }
    }

    fn finish(&mut self) {
        self.base = self.correct + self.incorrect;
        if self.base > 0 {
            self.correct_pct = round2(100.0 * self.correct as f64 / self.base as f64);
            self.incorrect_pct = round2(100.0 * self.incorrect as f64 / self.base as f64);
        }
    }

    /// Unrounded percentage of correct records over the base.
    pub fn correct_percent_exact(&self) -> f64 {
        if self.base == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.base as f64
        }
    }

    pub fn incorrect_percent_exact(&self) -> f64 {
        if self.base == 0 {
            0.0
        } else {
            100.0 * self.incorrect as f64 / self.base as f64
        }
    }
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationStats {
    pub overall: StatusCounts,
    pub by_type: BTreeMap<String, StatusCounts>,
}

pub fn verification_statistics(records: &[VerificationRecord]) -> VerificationStats {
    let mut s = VerificationStats::default();
    for r in records {
        s.overall.add(r.status);
        s.by_type.entry(r.biryani_type.clone()).or_default().add(r.status);
    }
    s.overall.finish();
    s.by_type.values_mut().for_each(StatusCounts::finish);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::mock::ScriptedVision;

    #[test]
    fn sampling_examples() {
        assert_eq!(sample_frame_indices(10, 20).unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(sample_frame_indices(21, 5).unwrap(), vec![0, 5, 10, 15, 20]);
        assert_eq!(sample_frame_indices(1, 20).unwrap(), vec![0]);
        assert!(sample_frame_indices(5, 0).is_err());
        // 7 * 1/2 = 3.5 rounds up.
        assert_eq!(sample_frame_indices(8, 3).unwrap(), vec![0, 4, 7]);
    }

    #[test]
    fn parse_rule() {
        assert_eq!(parse_yes_no("yes"), VerificationStatus::Correct);
        assert_eq!(parse_yes_no("No."), VerificationStatus::Incorrect);
        assert_eq!(parse_yes_no("  YES!\n"), VerificationStatus::Correct);
        assert_eq!(parse_yes_no("The action is visible"), VerificationStatus::Error);
        assert_eq!(parse_yes_no("yes, clearly"), VerificationStatus::Error);
        assert_eq!(parse_yes_no(""), VerificationStatus::Error);
    }

    fn target(n: usize) -> VerifyTarget {
        VerifyTarget {
            segment_id: "v@00:00:00-00:00:10".into(),
            video_id: "v".into(),
            biryani_type: "t".into(),
            action: "stirring rice".into(),
            frames: (0..n).map(|i| FrameRef::Embedding(format!("f{i}"))).collect(),
        }
    }

    #[test]
    fn auto_verify_sends_twenty_frames() {
        let vision = ScriptedVision::new().on("stirring rice", "No.");
        let rec = auto_verify(&target(50), &vision, 20);
        assert_eq!(rec.status, VerificationStatus::Incorrect);
        let calls = vision.calls();
        let expected: Vec<FrameRef> = sample_frame_indices(50, 20)
            .unwrap()
            .into_iter()
            .map(|i| FrameRef::Embedding(format!("f{i}")))
            .collect();
        assert_eq!(calls[0].0, expected);
    }

    #[test]
    fn provider_failure_is_error_status() {
        let vision = ScriptedVision::new();
        let rec = auto_verify(&target(3), &vision, 20);
        assert_eq!(rec.status, VerificationStatus::Error);
        assert!(rec.error.is_some());
        assert_eq!(auto_verify(&target(0), &vision, 20).status, VerificationStatus::Error);
    }

    fn rec(status: VerificationStatus, t: &str) -> VerificationRecord {
        VerificationRecord {
            segment_id: String::new(),
            video_id: String::new(),
            biryani_type: t.into(),
            action: String::new(),
            status,
            raw_response: None,
            error: None,
        }
    }

    #[test]
    fn statistics_exclude_errors() {
        let s = verification_statistics(&[rec(VerificationStatus::Correct, "a"), rec(VerificationStatus::Error, "b")]);
        assert_eq!(s.overall.base, 1);
        assert_eq!(s.overall.correct_pct, 100.0);
        assert_eq!(s.overall.errors, 1);
        assert_eq!(s.by_type["b"].base, 0);
        let all = verification_statistics(&vec![rec(VerificationStatus::Correct, "a"); 4]);
        assert_eq!((all.overall.correct_pct, all.overall.incorrect_pct), (100.0, 0.0));
    }
}
