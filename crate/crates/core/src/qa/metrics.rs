use std::collections::BTreeMap;

use crate::providers::embedding::dot;
use crate::providers::Embedding;

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut m = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Sentence BLEU with uniform weights up to `max_n`. Orders n >= 2 with a
/// zero clipped count use add-one smoothing on both sides.
pub fn bleu(candidate: &[String], references: &[Vec<String>], max_n: usize) -> f64 {
    if candidate.is_empty() || references.is_empty() || max_n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: BTreeMap<&[String], usize> = BTreeMap::new();
        for r in references {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let total: usize = cand.values().sum();
        let clipped: usize = cand
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if clipped > 0 {
            clipped as f64 / total as f64
        } else if n >= 2 {
            1.0 / (total as f64 + 1.0)
        } else {
            return 0.0;
        };
        log_sum += p.ln();
    }
    let c = candidate.len();
    // Closest reference length, shorter on ties.
    let r = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&l| (l.abs_diff(c), l))
        .unwrap_or(0);
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * (log_sum / max_n as f64).exp()
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let l = lcs_len(candidate, reference) as f64;
    let p = l / candidate.len() as f64;
    let r = l / reference.len() as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn greedy(side: &[&Embedding], other: &[&Embedding], weights: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (e, &w) in side.iter().zip(weights) {
        let best = other
            .iter()
            .map(|o| dot(e.as_slice(), o.as_slice()))
            .fold(f64::NEG_INFINITY, f64::max);
        num += w * best;
        den += w;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Greedy-matching BERTScore over per-token unit vectors. Missing idf
/// weights count as 1. With `baseline` b each score becomes (s - b)/(1 - b).
pub fn bertscore(
    candidate: &[String],
    reference: &[String],
    vectors: &BTreeMap<String, Embedding>,
    idf: Option<&BTreeMap<String, f64>>,
    baseline: Option<f64>,
) -> BertScore {
    let zero = BertScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    let look = |t: &[String]| t.iter().filter_map(|w| vectors.get(w)).collect::<Vec<_>>();
    let (c, r) = (look(candidate), look(reference));
    if c.is_empty() || r.is_empty() || c.len() != candidate.len() || r.len() != reference.len() {
        return zero;
    }
    let w = |t: &[String]| -> Vec<f64> {
        t.iter()
            .map(|x| idf.and_then(|m| m.get(x).copied()).unwrap_or(1.0))
            .collect()
    };
    let p = greedy(&c, &r, &w(candidate));
    let rc = greedy(&r, &c, &w(reference));
    let f = if p + rc == 0.0 { 0.0 } else { 2.0 * p * rc / (p + rc) };
    let rescale = |s: f64| match baseline {
        Some(b) if b < 1.0 => (s - b) / (1.0 - b),
        _ => s,
    };
    BertScore {
        precision: rescale(p),
        recall: rescale(rc),
        f1: rescale(f),
    }
}
