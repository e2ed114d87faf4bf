use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::metrics::{bertscore, bleu, rouge_l};
use super::{QAPair, Split, Tier};
use crate::error::{Error, Result};
use crate::providers::{Embedding, EmbeddingProvider};
use crate::text::tokenize;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// BERTScore rescaling baseline; off by default.
    pub bertscore_baseline: Option<f64>,
    pub bleu_max_n: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bertscore_baseline: None,
            bleu_max_n: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub count: usize,
    pub bleu: f64,
    pub rouge_l: f64,
    pub bertscore: f64,
}

/// Per-tier rows and the hard-arity breakdown. Tiers without test pairs
/// are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub overall: BTreeMap<String, Option<MetricRow>>,
    pub hard_breakdown: BTreeMap<String, Option<MetricRow>>,
}

struct Scored {
    bleu: f64,
    rouge: f64,
    bert: f64,
}

fn mean_row(scores: &[&Scored]) -> Option<MetricRow> {
    if scores.is_empty() {
        return None;
    }
    let n = scores.len() as f64;
    Some(MetricRow {
        count: scores.len(),
        bleu: scores.iter().map(|s| s.bleu).sum::<f64>() / n,
        rouge_l: scores.iter().map(|s| s.rouge).sum::<f64>() / n,
        bertscore: scores.iter().map(|s| s.bert).sum::<f64>() / n,
    })
}

/// Score model answers against the test split. Manifests without split
/// labels are scored in full.
pub fn evaluate_run(
    model: &str,
    answers: &[(String, String)],
    manifest: &[QAPair],
    embedder: &dyn EmbeddingProvider,
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    let labelled = manifest.iter().any(|p| p.split.is_some());
    let test: Vec<&QAPair> = manifest
        .iter()
        .filter(|p| !labelled || p.split == Some(Split::Test))
        .collect();
    let mut given: BTreeMap<&str, &str> = BTreeMap::new();
    let mut dup = BTreeSet::new();
    for (id, a) in answers {
        if given.insert(id, a).is_some() {
            dup.insert(id.as_str());
        }
    }
    if !dup.is_empty() {
        return Err(Error::Validation(format!(
            "answers given more than once: {}",
            dup.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let missing: Vec<&str> = test
        .iter()
        .filter(|p| !given.contains_key(p.id.as_str()))
        .map(|p| p.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!("missing answers for: {}", missing.join(", "))));
    }
    let wanted: BTreeSet<&str> = test.iter().map(|p| p.id.as_str()).collect();
    let extra = given.keys().filter(|k| !wanted.contains(*k)).count();
    if extra > 0 {
        log::warn!("{extra} answers do not match a test pair and are ignored");
    }

    let toks: Vec<(Vec<String>, Vec<String>)> = test
        .iter()
        .map(|p| (tokenize(given[p.id.as_str()]), tokenize(&p.answer)))
        .collect();
    let vocab: Vec<String> = toks
        .iter()
        .flat_map(|(c, r)| c.iter().chain(r))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut vectors: BTreeMap<String, Embedding> = BTreeMap::new();
    for chunk in vocab.chunks(256) {
        let vs = embedder.embed_texts(chunk)?;
        vectors.extend(chunk.iter().cloned().zip(vs));
    }
    let scored: Vec<Scored> = toks
        .iter()
        .map(|(c, r)| Scored {
            bleu: bleu(c, std::slice::from_ref(r), cfg.bleu_max_n),
            rouge: rouge_l(c, r),
            bert: bertscore(c, r, &vectors, None, cfg.bertscore_baseline).f1,
        })
        .collect();

    let mut overall = BTreeMap::new();
    for t in Tier::ALL {
        let rows: Vec<&Scored> = test.iter().zip(&scored).filter(|(p, _)| p.tier == t).map(|(_, s)| s).collect();
        overall.insert(t.name().to_string(), mean_row(&rows));
    }
    let mut hard_breakdown = BTreeMap::new();
    for a in 2..=5u8 {
        let rows: Vec<&Scored> = test
            .iter()
            .zip(&scored)
            .filter(|(p, _)| p.hard_arity == Some(a))
            .map(|(_, s)| s)
            .collect();
        hard_breakdown.insert(format!("hard{a}"), mean_row(&rows));
    }
    Ok(MetricReport {
        model: model.to_string(),
        overall,
        hard_breakdown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::mock::HashedEmbedder;

    fn pair(id: &str, tier: Tier, answer: &str) -> QAPair {
        QAPair {
            id: id.into(),
            tier,
            hard_arity: None,
            video_ids: vec!["v".into()],
            question: "q".into(),
            answer: answer.into(),
            segment: None,
            split: Some(Split::Test),
        }
    }

    #[test]
    fn gold_answers_score_one_and_absent_tiers_are_null() {
        let m = vec![pair("a", Tier::Medium, "rice is soaked for thirty minutes"), pair("b", Tier::Medium, "ghee")];
        let answers: Vec<(String, String)> = m.iter().map(|p| (p.id.clone(), p.answer.clone())).collect();
        let r = evaluate_run("gold", &answers, &m, &HashedEmbedder::default(), &EvalConfig::default()).unwrap();
        let row = r.overall["medium"].as_ref().unwrap();
        assert!((row.bleu - 1.0).abs() < 1e-12 && (row.rouge_l - 1.0).abs() < 1e-12 && (row.bertscore - 1.0).abs() < 1e-9);
        assert!(r.overall["easy"].is_none());
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["overall"]["hard"].is_null());
    }

    #[test]
    fn missing_answers_listed() {
        let m = vec![pair("a", Tier::Medium, "x"), pair("b", Tier::Medium, "y")];
        let err = evaluate_run("m", &[("a".into(), "x".into())], &m, &HashedEmbedder::default(), &EvalConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains('b'));
    }
}
