//! One PASS/FAIL line per primary acceptance criterion. Runs without the
//! libtest harness so the lines reach the terminal uncaptured.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use procflow::align::dtw_matrix;
use procflow::canonicalize::{cluster_actions, merge_consecutive, merge_spans, ClusteringConfig};
use procflow::compare::{
    aggregate_results, enumerate_pairs, pair_count, sample_combos, sample_pairs, Answer, ClipKey, ComparisonResult,
    DiffVerdict, VariationVerdict,
};
use procflow::corpus::Interval;
use procflow::fixtures;
use procflow::providers::mock::HashedEmbedder;
use procflow::providers::{Embedding, EmbeddingProvider};
use procflow::qa::metrics::{bertscore, bleu, rouge_l};
use procflow::qa::{dataset_statistics, Split, Tier};
use procflow::verify::verification_statistics;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

// ---------------------------------------------------------------- DTW

fn min_path_cost(d: &[Vec<f64>], i: usize, j: usize, acc: f64, best: &mut f64) {
    let acc = acc + d[i][j];
    let (m, n) = (d.len(), d[0].len());
    if i == m - 1 && j == n - 1 {
        *best = best.min(acc);
        return;
    }
    if i + 1 < m {
        min_path_cost(d, i + 1, j, acc, best);
    }
    if j + 1 < n {
        min_path_cost(d, i, j + 1, acc, best);
    }
    if i + 1 < m && j + 1 < n {
        min_path_cost(d, i + 1, j + 1, acc, best);
    }
}

fn dtw_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xD7);
    for case in 0..1000 {
        let (m, n) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let d: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(0.0..2.0)).collect()).collect();
        let got = dtw_matrix(&d).map_err(|e| e.to_string())?;
        let mut best = f64::INFINITY;
        min_path_cost(&d, 0, 0, 0.0, &mut best);
        ensure((got.cost - best).abs() <= 1e-12, || {
            format!("case {case} ({m}x{n}): dtw {} vs oracle {best}", got.cost)
        })?;
        let path_cost: f64 = got.path.iter().map(|&(i, j)| d[i][j]).sum();
        ensure((path_cost - got.cost).abs() <= 1e-12, || format!("case {case}: path does not realise its cost"))?;
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("1000 matrices up to 6x6 in {:.2} s", start.elapsed().as_secs_f64()))
}

// ---------------------------------------------------------- clustering

fn clustering_oracle() -> Check {
    let start = Instant::now();
    let vocab = fixtures::phrase_fixture(3, 400);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let cfg = ClusteringConfig::default();
    let mut merged_instances = 0;
    for case in 0..500 {
        // Small hash dimensions make near and exact collisions common.
        let embedder = HashedEmbedder::new([4, 8, 16][case % 3]);
        let k = rng.random_range(1..=12);
        let phrases: Vec<String> = (0..k).map(|_| vocab[rng.random_range(0..vocab.len())].clone()).collect();
        let got = cluster_actions(&phrases, &embedder, &cfg).map_err(|e| e.to_string())?;
        let unique: Vec<String> = phrases.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let vecs: Vec<Embedding> = embedder.embed_texts(&unique).map_err(|e| e.to_string())?;
        let q: Vec<Vec<u64>> = vecs
            .iter()
            .map(|a| {
                vecs.iter()
                    .map(|b| {
                        let dot: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum();
                        common::quantize(1.0 - dot)
                    })
                    .collect()
            })
            .collect();
        let want: BTreeSet<BTreeSet<String>> = common::clustering_brute(&q, common::quantize(cfg.distance_threshold))
            .into_iter()
            .map(|c| c.into_iter().map(|i| unique[i].clone()).collect())
            .collect();
        let have: BTreeSet<BTreeSet<String>> =
            got.iter().map(|c| c.phrases.iter().cloned().collect()).collect();
        ensure(have == want, || format!("case {case}: {have:?} vs oracle {want:?}"))?;
        if want.len() < unique.len() {
            merged_instances += 1;
        }
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "500 instances ({merged_instances} with merges) in {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

// --------------------------------------------------------------- merge

fn merging_fixture() -> Check {
    let start = Instant::now();
    let segs = fixtures::merge_fixture(2024);
    ensure(segs.len() == 16_761, || format!("fixture has {} segments", segs.len()))?;
    let spans = merge_consecutive(&segs).map_err(|e| e.to_string())?;
    ensure(spans.len() == 14_479, || format!("{} spans, want 14479", spans.len()))?;
    let reduction = 100.0 * (segs.len() - spans.len()) as f64 / segs.len() as f64;
    ensure(format!("{reduction:.1}") == "13.6", || format!("reduction {reduction:.3}%"))?;
    let again = merge_spans(&spans).map_err(|e| e.to_string())?;
    ensure(again == spans, || "merging is not idempotent".into())?;
    let mut seconds: BTreeMap<(&str, &str), u32> = BTreeMap::new();
    for s in &segs {
        *seconds.entry((&s.video_id, &s.label)).or_default() += s.interval.len();
    }
    for s in &spans {
        let e = seconds.entry((&s.video_id, &s.canonical_label)).or_default();
        *e = e.checked_sub(s.interval.len()).ok_or("span covers more than its sources")?;
    }
    ensure(seconds.values().all(|&v| v == 0), || "covered seconds changed".into())?;
    within(start.elapsed(), 5.0)?;
    Ok(format!(
        "16761 -> 14479 spans ({reduction:.1}% reduction), idempotent, in {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

// -------------------------------------------------------- verification

fn verification_accounting() -> Check {
    let records = fixtures::verification_fixture(7);
    let start = Instant::now();
    let s = verification_statistics(&records);
    let elapsed = start.elapsed();
    let o = &s.overall;
    ensure(o.base == 14_470 && o.correct == 11_295 && o.incorrect == 3_175 && o.errors == 0, || {
        format!("counts {o:?}")
    })?;
    let (c, i) = (o.correct_percent_exact(), o.incorrect_percent_exact());
    ensure((c - 78.05).abs() <= 0.01, || format!("correct {c}"))?;
    ensure((i - 21.95).abs() <= 0.01, || format!("incorrect {i}"))?;
    ensure((o.correct_pct + o.incorrect_pct - 100.0).abs() <= 0.01, || "percentages do not sum to 100".into())?;
    within(elapsed, 1.0)?;
    Ok(format!(
        "{c:.3}% / {i:.3}% over 14470 (reported {:.2} / {:.2}) in {:.3} s",
        o.correct_pct,
        o.incorrect_pct,
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------- comparison

fn random_results(rng: &mut ChaCha8Rng) -> Vec<ComparisonResult> {
    let clip = ClipKey {
        video_id: "v".into(),
        interval: Interval::new(0, 10).unwrap(),
        biryani_type: "t".into(),
    };
    (0..rng.random_range(0..40))
        .map(|i| {
            let verdicts = (0..rng.random_range(1..=3))
                .map(|j| {
                    if rng.random_bool(0.1) {
                        return VariationVerdict::failed(format!("v{j}"), "provider error");
                    }
                    let answer = [Answer::A, Answer::B, Answer::C, Answer::D][rng.random_range(0..4)];
                    VariationVerdict::ok(
                        format!("v{j}"),
                        DiffVerdict {
                            answer,
                            confidence: rng.random_range(1..=5),
                            difference_visible: rng.random_bool(0.5),
                            explanation: String::new(),
                        },
                    )
                })
                .collect();
            ComparisonResult::new(format!("p{i}"), "x".into(), clip.clone(), clip.clone(), verdicts)
        })
        .collect()
}

fn comparison_aggregation() -> Check {
    let s = aggregate_results(&fixtures::aggregation_fixture(42));
    ensure(s.comparisons == 1000 && s.detected_comparisons == 332, || format!("{s:?}"))?;
    ensure((s.comparison_detected_rate - 0.332).abs() < 1e-12, || format!("detected {}", s.comparison_detected_rate))?;
    ensure((s.comparison_none_rate - 0.668).abs() < 1e-12, || format!("none {}", s.comparison_none_rate))?;
    ensure((s.absolute_rate - 0.19).abs() < 0.005, || format!("absolute {}", s.absolute_rate))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xA6);
    for case in 0..2000 {
        let r = aggregate_results(&random_results(&mut rng));
        ensure(r.absolute_rate <= r.comparison_detected_rate + 1e-12, || {
            format!("random fixture {case}: absolute {} > comparison {}", r.absolute_rate, r.comparison_detected_rate)
        })?;
    }
    Ok(format!(
        "{:.1}% detected / {:.1}% none, absolute {:.1}%; absolute <= comparison on 2000 random fixtures",
        100.0 * s.comparison_detected_rate,
        100.0 * s.comparison_none_rate,
        100.0 * s.absolute_rate
    ))
}

// ------------------------------------------------------------- metrics

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == *n))
}

fn lcs_brute(a: &[String], b: &[String]) -> usize {
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let sub: Vec<&String> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
            is_subsequence(&sub, b).then_some(sub.len())
        })
        .max()
        .unwrap_or(0)
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Best total similarity over every map from `from` tokens to `to` tokens.
fn best_assignment(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    let cos = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let maps = to.len().pow(from.len() as u32);
    (0..maps)
        .map(|mut code| {
            let mut total = 0.0;
            for f in from {
                total += cos(f, &to[code % to.len()]);
                code /= to.len();
            }
            total / from.len() as f64
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn metrics() -> Check {
    let r = rouge_l(&toks("the cat sat"), &toks("the cat ran on mat"));
    ensure(r == 0.5, || format!("rouge_l example {r}"))?;
    let x = toks("marinate the chicken overnight with yogurt");
    let b = bleu(&x, std::slice::from_ref(&x), 4);
    ensure(b == 1.0, || format!("bleu identity {b}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5E);
    let vocab = ["a", "b", "c", "d"];
    let mut rouge_cases = 0;
    for la in 0..=8 {
        for lb in 0..=8 {
            for _ in 0..6 {
                let a: Vec<String> = (0..la).map(|_| vocab[rng.random_range(0..4)].to_string()).collect();
                let b: Vec<String> = (0..lb).map(|_| vocab[rng.random_range(0..4)].to_string()).collect();
                let l = lcs_brute(&a, &b);
                let want = if l == 0 { 0.0 } else { f1(l as f64 / la as f64, l as f64 / lb as f64) };
                let got = rouge_l(&a, &b);
                ensure((got - want).abs() < 1e-12, || format!("rouge_l {a:?} {b:?}: {got} vs {want}"))?;
                rouge_cases += 1;
            }
        }
    }

    let mut bert_cases = 0;
    for _ in 0..500 {
        let (lc, lr) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let dim = rng.random_range(2..=4);
        let mut vectors = BTreeMap::new();
        let mut raw: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for w in 0..lc + lr {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let e = Embedding::normalized(v).map_err(|e| e.to_string())?;
            raw.insert(format!("w{w}"), e.as_slice().to_vec());
            vectors.insert(format!("w{w}"), e);
        }
        let cand: Vec<String> = (0..lc).map(|i| format!("w{i}")).collect();
        let refr: Vec<String> = (lc..lc + lr).map(|i| format!("w{i}")).collect();
        let cv: Vec<Vec<f64>> = cand.iter().map(|w| raw[w].clone()).collect();
        let rv: Vec<Vec<f64>> = refr.iter().map(|w| raw[w].clone()).collect();
        let (p, r) = (best_assignment(&cv, &rv), best_assignment(&rv, &cv));
        let got = bertscore(&cand, &refr, &vectors, None, None);
        ensure(
            (got.precision - p).abs() <= 1e-9 && (got.recall - r).abs() <= 1e-9 && (got.f1 - f1(p, r)).abs() <= 1e-9,
            || format!("bertscore {cand:?} vs {refr:?}: {got:?}, oracle P={p} R={r}"),
        )?;
        bert_cases += 1;
    }
    Ok(format!(
        "rouge example 0.5, bleu identity 1.0, {rouge_cases} exhaustive ROUGE-L cases, {bert_cases} BERTScore cases"
    ))
}

// ------------------------------------------------------------------ QA

fn qa_statistics() -> Check {
    let manifest = fixtures::qa_fixture(17);
    let s = dataset_statistics(&manifest);
    let pct = |t: Tier| s.tiers.get(&t).map(|x| x.pct).unwrap_or(f64::NAN);
    let count = |t: Tier| s.tiers.get(&t).map(|x| x.count).unwrap_or(0);
    ensure(count(Tier::Easy) == 240 && count(Tier::Medium) == 1357 && count(Tier::Hard) == 486, || {
        format!("tier counts {:?}", s.tiers)
    })?;
    ensure(pct(Tier::Easy) == 11.5 && pct(Tier::Medium) == 65.1 && pct(Tier::Hard) == 23.3, || {
        format!("tier pct {} {} {}", pct(Tier::Easy), pct(Tier::Medium), pct(Tier::Hard))
    })?;
    let want: BTreeMap<String, usize> =
        [("hard2", 146), ("hard3", 171), ("hard4", 82), ("hard5", 87)].map(|(k, v)| (k.to_string(), v)).into();
    ensure(s.hard_arity == want, || format!("hard buckets {:?}", s.hard_arity))?;
    let mut buckets: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for p in &manifest {
        let e = buckets.entry(p.bucket()).or_default();
        match p.split {
            Some(Split::Train) => e.0 += 1,
            Some(Split::Test) => e.1 += 1,
            None => return Err(format!("{} has no split", p.id)),
        }
    }
    for (b, (tr, te)) in &buckets {
        ensure(tr.abs_diff(*te) <= 1, || format!("bucket {b}: {tr}/{te}"))?;
    }
    let words = |t: Tier| s.tiers[&t].mean_answer_words;
    ensure(words(Tier::Easy) < words(Tier::Medium) && words(Tier::Medium) < words(Tier::Hard), || {
        "mean answer length not increasing by tier".into()
    })?;
    Ok(format!(
        "11.5/65.1/23.3%, hard 146/171/82/87, {} buckets split within 1",
        buckets.len()
    ))
}

// ----------------------------------------------------------------- e2e

fn end_to_end() -> Check {
    let start = Instant::now();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::run_pipeline(a.path())?;
    common::run_pipeline(b.path())?;
    let (ta, tb) = (common::tree(&a.path().join("derived")), common::tree(&b.path().join("derived")));
    ensure(!ta.is_empty(), || "no derived files".into())?;
    ensure(ta.keys().eq(tb.keys()), || "derived trees list different files".into())?;
    for (k, v) in &ta {
        ensure(&tb[k] == v, || format!("{k} differs between runs"))?;
    }
    for needed in ["qa/eval/halfway.json", "compare/results.jsonl", "verify/records.jsonl", "align/index.json"] {
        ensure(ta.contains_key(needed), || format!("missing derived/{needed}"))?;
    }
    within(start.elapsed(), 120.0)?;
    Ok(format!(
        "{} derived files byte-identical across two runs, {:.1} s",
        ta.len(),
        start.elapsed().as_secs_f64()
    ))
}

// ------------------------------------------------------- combinatorics

fn combinatorics() -> Check {
    ensure(pair_count(348) == 60_378, || format!("pair_count(348) = {}", pair_count(348)))?;
    let all = enumerate_pairs(348);
    ensure(all.len() == 348 * 347 / 2, || format!("{} pairs", all.len()))?;
    let distinct: BTreeSet<_> = all.iter().collect();
    ensure(distinct.len() == all.len() && all.iter().all(|&(i, j)| i < j && j < 348), || {
        "pairs not distinct and ordered".into()
    })?;
    let s1 = sample_pairs(348, Some(500), 99);
    ensure(s1 == sample_pairs(348, Some(500), 99), || "seeded pair sampling not reproducible".into())?;
    ensure(s1.len() == 500 && s1.iter().all(|p| distinct.contains(p)), || "sample not drawn from the pairs".into())?;
    ensure(s1 != sample_pairs(348, Some(500), 100), || "seed has no effect".into())?;
    let c = sample_combos(120, 5, 87, 3).map_err(|e| e.to_string())?;
    ensure(c == sample_combos(120, 5, 87, 3).map_err(|e| e.to_string())?, || "combos not reproducible".into())?;
    Ok("C(348,2) = 60378 enumerated; seeded pair and combo sampling reproducible".into())
}

fn main() {
    let checks: [(&str, fn() -> Check); 9] = [
        ("dtw-oracle", dtw_oracle),
        ("clustering-oracle", clustering_oracle),
        ("merging-fixture", merging_fixture),
        ("verification-accounting", verification_accounting),
        ("comparison-aggregation", comparison_aggregation),
        ("metrics", metrics),
        ("qa-statistics", qa_statistics),
        ("end-to-end-determinism", end_to_end),
        ("combinatorics", combinatorics),
    ];
    let mut failed = 0;
    for (name, f) in checks {
        match f() {
            Ok(detail) => println!("PASS  {name:<26} {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<26} {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
