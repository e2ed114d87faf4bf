use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Interval};
use crate::error::{Error, Result};

/// One chunk carrying one canonical label. A chunk with several labels
/// appears once per label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub video_id: String,
    pub segment_id: String,
    pub interval: Interval,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedSpan {
    pub video_id: String,
    pub canonical_label: String,
    pub interval: Interval,
    pub source_segment_ids: Vec<String>,
}

/// Expand corpus segments into labeled chunks using a phrase-to-label map.
/// Phrases missing from the map are skipped.
pub fn labeled_segments(corpus: &Corpus, labels: &BTreeMap<String, String>) -> Vec<LabeledSegment> {
    let mut out = Vec::new();
    for seg in &corpus.segments {
        let mut seen: Vec<&str> = Vec::new();
        for a in &seg.actions {
            if let Some(l) = labels.get(a) {
                if !seen.contains(&l.as_str()) {
                    seen.push(l);
                    out.push(LabeledSegment {
                        video_id: seg.video_id.clone(),
                        segment_id: seg.id(),
                        interval: seg.timestamp,
                        label: l.clone(),
                    });
                }
            }
        }
    }
    out
}

/// Within a video, chunks must either share an interval or not overlap.
fn check_chunk_grid(segments: &[LabeledSegment]) -> Result<()> {
    let mut by_video: BTreeMap<&str, Vec<Interval>> = BTreeMap::new();
    for s in segments {
        by_video.entry(&s.video_id).or_default().push(s.interval);
    }
    for (video, mut ivs) in by_video {
        ivs.sort();
        ivs.dedup();
        for w in ivs.windows(2) {
            if w[0].overlaps(&w[1]) {
                return Err(Error::Validation(format!(
                    "video {video}: segments {} and {} overlap",
                    w[0], w[1]
                )));
            }
        }
    }
    Ok(())
}

/// Fuse same-label chunks of a video whose intervals touch end to start.
pub fn merge_consecutive(segments: &[LabeledSegment]) -> Result<Vec<MergedSpan>> {
    check_chunk_grid(segments)?;
    let spans: Vec<MergedSpan> = segments
        .iter()
        .map(|s| MergedSpan {
            video_id: s.video_id.clone(),
            canonical_label: s.label.clone(),
            interval: s.interval,
            source_segment_ids: vec![s.segment_id.clone()],
        })
        .collect();
    merge_spans(&spans)
}

/// The merge rule applied to spans; `merge_spans(merge_consecutive(x))`
/// returns its input unchanged. Output is ordered by (video, start, label).
pub fn merge_spans(spans: &[MergedSpan]) -> Result<Vec<MergedSpan>> {
    let mut groups: BTreeMap<(&str, &str), Vec<&MergedSpan>> = BTreeMap::new();
    for s in spans {
        groups.entry((&s.video_id, &s.canonical_label)).or_default().push(s);
    }
    let mut out: Vec<MergedSpan> = Vec::new();
    for ((video, label), mut items) in groups {
        items.sort_by_key(|s| s.interval);
        let mut cur: Option<MergedSpan> = None;
        for s in items {
            match cur.as_mut() {
                Some(c) if c.interval == s.interval => {
                    for id in &s.source_segment_ids {
                        if !c.source_segment_ids.contains(id) {
                            c.source_segment_ids.push(id.clone());
                        }
                    }
                }
                Some(c) if c.interval.end == s.interval.start => {
                    c.interval.end = s.interval.end;
                    c.source_segment_ids.extend(s.source_segment_ids.iter().cloned());
                }
                Some(c) if c.interval.end > s.interval.start => {
                    return Err(Error::Validation(format!(
                        "video {video}: overlapping spans {} and {} for {label:?}",
                        c.interval, s.interval
                    )));
                }
                _ => {
                    out.extend(cur.take());
                    cur = Some(s.clone());
                }
            }
        }
        out.extend(cur);
    }
    out.sort_by(|a, b| {
        (&a.video_id, a.interval.start, &a.canonical_label).cmp(&(&b.video_id, b.interval.start, &b.canonical_label))
    });
    Ok(out)
}
