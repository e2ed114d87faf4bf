//! Seeded synthetic datasets sized to fixed target counts. They back
//! the acceptance suite and integration tests; nothing here touches disk.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::canonicalize::LabeledSegment;
use crate::compare::{Answer, ClipKey, ComparisonResult, DiffVerdict, VariationVerdict};
use crate::corpus::{Corpus, Interval, DEFAULT_CATEGORIES};
use crate::qa::{split_dataset, QAPair, SegmentSpan, Tier};
use crate::verify::{review_pool, ReviewItem, VerificationRecord, VerificationStatus, Verdict};

pub const MERGE_VIDEOS: usize = 120;
/// (run length, number of runs): 16,761 labeled chunks that merge to 14,479.
pub const MERGE_RUNS: [(usize, usize); 3] = [(1, 12_497), (2, 1_682), (3, 300)];
pub const MERGE_LABELS: usize = 2_187;
const CHUNK_S: u32 = 10;

fn video_id(i: usize) -> String {
    format!("vid{i:03}")
}

fn category(i: usize) -> &'static str {
    DEFAULT_CATEGORIES[i % DEFAULT_CATEGORIES.len()]
}

/// Labeled 10-second chunks over 120 videos. Runs of one label are laid out
/// back to back, and neighbouring runs never share a label.
pub fn merge_fixture(seed: u64) -> Vec<LabeledSegment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut runs: Vec<usize> = MERGE_RUNS.iter().flat_map(|&(len, n)| std::iter::repeat_n(len, n)).collect();
    runs.shuffle(&mut rng);
    let mut per_video: Vec<Vec<usize>> = vec![Vec::new(); MERGE_VIDEOS];
    for (i, r) in runs.into_iter().enumerate() {
        per_video[i % MERGE_VIDEOS].push(r);
    }
    let mut out = Vec::new();
    for (v, runs) in per_video.into_iter().enumerate() {
        let vid = video_id(v);
        let mut t = 0u32;
        let mut prev = usize::MAX;
        for len in runs {
            let mut label = rng.random_range(0..MERGE_LABELS);
            while label == prev {
                label = rng.random_range(0..MERGE_LABELS);
            }
            prev = label;
            for _ in 0..len {
                let interval = Interval::new(t, t + CHUNK_S).expect("positive width");
                out.push(LabeledSegment {
                    video_id: vid.clone(),
                    segment_id: format!("{vid}@{interval}"),
                    interval,
                    label: format!("action {label:04}"),
                });
                t += CHUNK_S;
            }
        }
    }
    out
}

pub const VERIFIED_TOTAL: usize = 14_470;
pub const VERIFIED_CORRECT: usize = 11_295;

/// 14,470 verification records, 11,295 of them Correct, in seeded order.
pub fn verification_fixture(seed: u64) -> Vec<VerificationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut statuses: Vec<VerificationStatus> = (0..VERIFIED_TOTAL)
        .map(|i| {
            if i < VERIFIED_CORRECT {
                VerificationStatus::Correct
            } else {
                VerificationStatus::Incorrect
            }
        })
        .collect();
    statuses.shuffle(&mut rng);
    statuses
        .into_iter()
        .enumerate()
        .map(|(i, status)| {
            let v = i % MERGE_VIDEOS;
            VerificationRecord {
                segment_id: format!("{}@{}-{}", video_id(v), i * 10, i * 10 + 10),
                video_id: video_id(v),
                biryani_type: category(v).to_string(),
                action: format!("action {:04}", i % MERGE_LABELS),
                status,
                raw_response: Some(if status == VerificationStatus::Correct { "yes" } else { "no" }.into()),
                error: None,
            }
        })
        .collect()
}

pub const AGG_COMPARISONS: usize = 1_000;
pub const AGG_VARIATIONS: usize = 3;
/// Comparisons with 3, 2 and 1 detected variations; 332 in all, 570 detected
/// variations out of 3,000.
pub const AGG_DETECTED: [(usize, usize); 3] = [(3, 80), (2, 78), (1, 174)];

fn clip(v: usize, start: u32) -> ClipKey {
    ClipKey {
        video_id: video_id(v),
        interval: Interval::new(start, start + CHUNK_S).expect("positive width"),
        biryani_type: category(v).to_string(),
    }
}

fn verdict(answer: Answer, visible: bool, confidence: u8) -> DiffVerdict {
    DiffVerdict {
        answer,
        confidence,
        difference_visible: visible,
        explanation: String::new(),
    }
}

/// A non-detected verdict of one of the four shapes: unsure, both, or a
/// letter without a visible difference.
fn miss(rng: &mut ChaCha8Rng) -> DiffVerdict {
    match rng.random_range(0..4) {
        0 => verdict(Answer::C, false, rng.random_range(1..=5)),
        1 => verdict(Answer::D, false, rng.random_range(1..=5)),
        2 => verdict(Answer::A, false, rng.random_range(1..=3)),
        _ => verdict(Answer::B, false, rng.random_range(1..=3)),
    }
}

fn hit(rng: &mut ChaCha8Rng) -> DiffVerdict {
    let a = if rng.random_bool(0.5) { Answer::A } else { Answer::B };
    verdict(a, true, rng.random_range(2..=5))
}

/// 1,000 three-variation comparisons with a fixed detected-variation distribution.
pub fn aggregation_fixture(seed: u64) -> Vec<ComparisonResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut detected_counts: Vec<usize> = AGG_DETECTED
        .iter()
        .flat_map(|&(k, n)| std::iter::repeat_n(k, n))
        .collect();
    detected_counts.resize(AGG_COMPARISONS, 0);
    detected_counts.shuffle(&mut rng);
    detected_counts
        .into_iter()
        .enumerate()
        .map(|(i, k)| {
            let mut slots: Vec<bool> = (0..AGG_VARIATIONS).map(|j| j < k).collect();
            slots.shuffle(&mut rng);
            let verdicts = slots
                .into_iter()
                .enumerate()
                .map(|(j, d)| {
                    let v = if d { hit(&mut rng) } else { miss(&mut rng) };
                    VariationVerdict::ok(format!("variation {j}"), v)
                })
                .collect();
            let (va, vb) = (rng.random_range(0..MERGE_VIDEOS), rng.random_range(0..MERGE_VIDEOS));
            ComparisonResult::new(
                format!("c{:04}-p{i:05}", i % 37),
                format!("action {:04}", i % 37),
                clip(va, 10 * rng.random_range(0..60)),
                clip(vb, 10 * rng.random_range(0..60)),
                verdicts,
            )
        })
        .collect()
}

pub const REVIEW_DETECTED: (usize, usize) = (675, 325);
pub const REVIEW_NOT_DETECTED: (usize, usize) = (457, 543);

/// A 2,000-item review pool (half detected by the model) and one verdict per
/// item reproducing a fixed confirmed/rejected split per category.
pub fn review_fixture(seed: u64) -> (Vec<ReviewItem>, Vec<(String, Verdict)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per = REVIEW_DETECTED.0 + REVIEW_DETECTED.1;
    let results: Vec<ComparisonResult> = (0..2 * per)
        .map(|i| {
            let v = if i < per { hit(&mut rng) } else { miss(&mut rng) };
            ComparisonResult::new(
                format!("r{i:05}"),
                format!("action {:04}", i % 41),
                clip(i % MERGE_VIDEOS, 0),
                clip((i + 7) % MERGE_VIDEOS, 10),
                vec![VariationVerdict::ok("variation", v)],
            )
        })
        .collect();
    let pool = review_pool(&results, &Corpus::default());
    let mut label = |items: &[ReviewItem], (yes, no): (usize, usize)| {
        let mut vs: Vec<Verdict> = std::iter::repeat_n(Verdict::Confirmed, yes)
            .chain(std::iter::repeat_n(Verdict::Rejected, no))
            .collect();
        vs.shuffle(&mut rng);
        items.iter().map(|it| it.item_id.clone()).zip(vs).collect::<Vec<_>>()
    };
    let mut verdicts = label(&pool[..per], REVIEW_DETECTED);
    verdicts.extend(label(&pool[per..], REVIEW_NOT_DETECTED));
    (pool, verdicts)
}

pub const QA_EASY: usize = 240;
pub const QA_MEDIUM: usize = 1_357;
/// Hard pairs by arity 2..=5.
pub const QA_HARD: [(u8, usize); 4] = [(2, 146), (3, 171), (4, 82), (5, 87)];

const WORDS: [&str; 16] = [
    "rice", "chicken", "onions", "ghee", "saffron", "yogurt", "mint", "pot", "layer", "fry", "stir", "cook", "spices",
    "dum", "lid", "masala",
];

fn sentence(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// Answer lengths vary by ±2 words around the tier mean.
fn answer(rng: &mut ChaCha8Rng, mean: usize) -> String {
    let n = mean - 2 + rng.random_range(0..5);
    sentence(rng, n)
}

/// Target QA manifest shape: 240 easy (two per video), 1,357 medium
/// and 486 hard pairs, answers averaging about 12, 16 and 20 words, split
/// 50/50 per bucket.
pub fn qa_fixture(seed: u64) -> Vec<QAPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for i in 0..QA_EASY {
        let v = i / 2;
        pairs.push(QAPair {
            id: format!("easy-{}-{:03}-{}", video_id(v), i % 2, 0),
            tier: Tier::Easy,
            hard_arity: None,
            video_ids: vec![video_id(v)],
            question: "What are the ingredients shown in this segment?".into(),
            answer: answer(&mut rng, 12),
            segment: Some(SegmentSpan {
                chunk_index: i % 2,
                interval: Interval::new(10 * (i % 2) as u32, 10 * (i % 2) as u32 + 10).expect("positive width"),
            }),
            split: None,
        });
    }
    for i in 0..QA_MEDIUM {
        let v = i % MERGE_VIDEOS;
        pairs.push(QAPair {
            id: format!("medium-{}-{:02}", video_id(v), i / MERGE_VIDEOS),
            tier: Tier::Medium,
            hard_arity: None,
            video_ids: vec![video_id(v)],
            question: format!("What happens after the {}?", sentence(&mut rng, 2)),
            answer: answer(&mut rng, 16),
            segment: None,
            split: None,
        });
    }
    for (arity, n) in QA_HARD {
        for i in 0..n {
            let videos: Vec<String> = (0..arity as usize).map(|k| video_id((i * 7 + k * 13) % MERGE_VIDEOS)).collect();
            pairs.push(QAPair {
                id: format!("hard{arity}-{:04}-{:02}", i / 3, i % 3),
                tier: Tier::Hard,
                hard_arity: Some(arity),
                video_ids: videos,
                question: format!("Which video uses more {}?", sentence(&mut rng, 1)),
                answer: answer(&mut rng, 20),
                segment: None,
                split: None,
            });
        }
    }
    split_dataset(&pairs, seed)
}

/// `n` distinct short action phrases built from verb, object and manner
/// vocabularies.
pub fn phrase_fixture(seed: u64, n: usize) -> Vec<String> {
    const VERBS: [&str; 24] = [
        "stirring", "frying", "adding", "mixing", "washing", "soaking", "chopping", "slicing", "layering", "sealing",
        "garnishing", "pouring", "boiling", "draining", "grinding", "roasting", "marinating", "covering", "sprinkling",
        "spreading", "heating", "tasting", "serving", "kneading",
    ];
    const OBJECTS: [&str; 30] = [
        "rice", "chicken", "mutton", "onions", "tomatoes", "ghee", "oil", "saffron milk", "yogurt", "mint leaves",
        "coriander", "green chillies", "ginger garlic paste", "whole spices", "biryani masala", "potatoes", "eggs",
        "cashews", "raisins", "water", "salt", "turmeric", "chilli powder", "bay leaves", "cardamom", "cloves",
        "cinnamon", "dough", "fried onions", "lemon juice",
    ];
    const MANNERS: [&str; 16] = [
        "", "in a pot", "in a pan", "with a ladle", "with a wooden spoon", "on low heat", "on high heat", "in a bowl",
        "gently", "thoroughly", "until golden", "in layers", "for five minutes", "in the pressure cooker",
        "by hand", "evenly",
    ];
    let mut all: Vec<String> = Vec::with_capacity(VERBS.len() * OBJECTS.len() * MANNERS.len());
    for v in VERBS {
        for o in OBJECTS {
            for m in MANNERS {
                all.push(if m.is_empty() { format!("{v} {o}") } else { format!("{v} {o} {m}") });
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    all.shuffle(&mut rng);
    all.truncate(n);
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_fixture_has_target_segment_count() {
        assert_eq!(merge_fixture(1).len(), 16_761);
    }

    #[test]
    fn aggregation_counts() {
        let r = aggregation_fixture(3);
        assert_eq!(r.iter().filter(|c| c.comparison_detected).count(), 332);
        let det: usize = r.iter().map(|c| c.verdicts.iter().filter(|v| v.detected()).count()).sum();
        assert_eq!(det, 570);
    }

    #[test]
    fn phrase_fixture_is_distinct() {
        let p = phrase_fixture(0, 10_481);
        assert_eq!(p.len(), 10_481);
        assert_eq!(p.iter().collect::<std::collections::BTreeSet<_>>().len(), 10_481);
    }
}
