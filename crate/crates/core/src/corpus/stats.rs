use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::text::{verb_and_nouns, StopWords};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub video_count: usize,
    pub segment_count: usize,
    pub action_count: usize,
    pub per_type: BTreeMap<String, usize>,
    pub duration_bin_s: u32,
    /// Bin start (seconds) to number of videos.
    pub duration_histogram: BTreeMap<u32, usize>,
    pub verb_frequency: BTreeMap<String, usize>,
    pub noun_frequency: BTreeMap<String, usize>,
    /// noun -> verb -> number of action phrases containing both.
    pub cooccurrence: BTreeMap<String, BTreeMap<String, usize>>,
}

pub fn corpus_statistics(corpus: &Corpus, bin_s: u32, stop: &StopWords) -> CorpusStats {
    let bin_s = bin_s.max(1);
    let mut st = CorpusStats {
        duration_bin_s: bin_s,
        ..Default::default()
    };
    for v in corpus.videos.values() {
        st.video_count += 1;
        *st.per_type.entry(v.biryani_type.clone()).or_default() += 1;
        *st.duration_histogram.entry(v.duration_s / bin_s * bin_s).or_default() += 1;
    }
    for seg in &corpus.segments {
        st.segment_count += 1;
        for phrase in &seg.actions {
            let Some((verb, nouns)) = verb_and_nouns(phrase, stop) else {
                continue;
            };
            st.action_count += 1;
            *st.verb_frequency.entry(verb.clone()).or_default() += 1;
            for n in &nouns {
                *st.noun_frequency.entry(n.clone()).or_default() += 1;
            }
            let mut distinct = nouns;
            distinct.sort();
            distinct.dedup();
            for n in distinct {
                *st.cooccurrence.entry(n).or_default().entry(verb.clone()).or_default() += 1;
            }
        }
    }
    st
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Interval, SegmentAnnotation, VideoRecord};

    fn video(id: &str, ty: &str, dur: u32) -> VideoRecord {
        VideoRecord {
            video_id: id.into(),
            biryani_type: ty.into(),
            title: String::new(),
            url: String::new(),
            duration_s: dur,
            extras: Default::default(),
        }
    }

    fn seg(video: &str, start: u32, actions: &[&str]) -> SegmentAnnotation {
        SegmentAnnotation {
            video_id: video.into(),
            timestamp: Interval { start, end: start + 10 },
            title: String::new(),
            url: String::new(),
            ingredients: vec![],
            utensils: vec![],
            actions: actions.iter().map(|s| s.to_string()).collect(),
            extras: Default::default(),
        }
    }

    #[test]
    fn empty_corpus_is_zeroed() {
        let st = corpus_statistics(&Corpus::default(), 60, &StopWords::default());
        assert_eq!(st.video_count, 0);
        assert!(st.duration_histogram.is_empty() && st.cooccurrence.is_empty());
    }

    #[test]
    fn single_action_counts() {
        let c = Corpus::from_parts(
            vec![video("v", "ambur_biryani", 400)],
            vec![seg("v", 0, &["chopping onions"])],
            vec![],
            vec![],
            Default::default(),
        )
        .unwrap();
        let st = corpus_statistics(&c, 60, &StopWords::default());
        assert_eq!(st.verb_frequency["chopping"], 1);
        assert_eq!(st.noun_frequency["onions"], 1);
        assert_eq!(st.cooccurrence["onions"]["chopping"], 1);
        assert_eq!(st.duration_histogram[&360], 1);
    }

    #[test]
    fn histogram_sums_to_video_count() {
        let vids: Vec<_> = (0..37).map(|i| video(&format!("v{i}"), "t", 200 + 17 * i)).collect();
        let c = Corpus::from_parts(vids, vec![], vec![], vec![], Default::default()).unwrap();
        let st = corpus_statistics(&c, 60, &StopWords::default());
        assert_eq!(st.duration_histogram.values().sum::<usize>(), 37);
    }
}
