use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{read_jsonl_file, to_jsonl, Stage, Workspace};
use crate::align::{assign_chunks, coarse_filter, dtw_align, AlignmentExport, ChunkInput, SimilarityMatrix};
use crate::canonicalize::{
    attach_clips, cluster_actions, embed_all, from_action_map, label_lookup, labeled_segments, merge_consecutive,
    refine_cluster, to_action_map, ActionCluster, ActionMap, MergedSpan, RefineOutcome,
};
use crate::compare::{
    action_steps_from_assignments, aggregate_results, class_clips, run_comparisons, stage_variation_map,
    CompareProviders, ComparisonResult,
};
use crate::corpus::{corpus_statistics, retrieve_clips, Corpus, Sentence};
use crate::error::{parse_json_file, Error, Result};
use crate::qa::{dataset_statistics, evaluate_run, generate_dataset, QAPair, Tier};
use crate::text::slug;
use crate::verify::{review_pool, verification_statistics, verify_all, verify_targets, ReviewStore};

#[derive(Debug, Clone)]
pub enum StageArgs {
    Ingest,
    Stats,
    Canonicalize,
    Merge,
    VerifyAuto {
        max_frames: Option<usize>,
    },
    Align,
    Compare {
        seed: u64,
        /// Overrides the configured cap; `Some(0)` runs every pair.
        max_pairs: Option<usize>,
        k_frames: Option<usize>,
    },
    ReviewServe {
        addr: SocketAddr,
        ui_dir: Option<PathBuf>,
    },
    QaGen {
        seed: u64,
        tiers: Vec<Tier>,
    },
    QaEval {
        answers: PathBuf,
        manifest: Option<PathBuf>,
    },
    Retrieve {
        query: String,
        k: usize,
    },
}

impl StageArgs {
    pub fn stage(&self) -> Stage {
        match self {
            StageArgs::Ingest => Stage::Ingest,
            StageArgs::Stats => Stage::Stats,
            StageArgs::Canonicalize => Stage::Canonicalize,
            StageArgs::Merge => Stage::Merge,
            StageArgs::VerifyAuto { .. } => Stage::VerifyAuto,
            StageArgs::Align => Stage::Align,
            StageArgs::Compare { .. } => Stage::Compare,
            StageArgs::ReviewServe { .. } => Stage::ReviewServe,
            StageArgs::QaGen { .. } => Stage::QaGen,
            StageArgs::QaEval { .. } => Stage::QaEval,
            StageArgs::Retrieve { .. } => Stage::Retrieve,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub outputs: Vec<PathBuf>,
    pub summary: Value,
}

pub fn run_stage(ws: &Workspace, args: &StageArgs, force: bool) -> Result<StageReport> {
    let stage = args.stage();
    ws.check_ready(stage, force)?;
    log::info!("running stage {}", stage.name());
    let (outputs, summary) = match args {
        StageArgs::Ingest => ingest(ws)?,
        StageArgs::Stats => stats(ws)?,
        StageArgs::Canonicalize => canonicalize(ws)?,
        StageArgs::Merge => merge(ws)?,
        StageArgs::VerifyAuto { max_frames } => verify_auto(ws, *max_frames)?,
        StageArgs::Align => align(ws)?,
        StageArgs::Compare {
            seed,
            max_pairs,
            k_frames,
        } => compare(ws, *seed, *max_pairs, *k_frames)?,
        StageArgs::ReviewServe { addr, ui_dir } => {
            let router = review_router(ws, ui_dir.clone())?;
            crate::verify::server::serve(router, *addr)?;
            (Vec::new(), json!({"served": addr.to_string()}))
        }
        StageArgs::QaGen { seed, tiers } => qa_gen(ws, *seed, tiers)?,
        StageArgs::QaEval { answers, manifest } => qa_eval(ws, answers, manifest.as_deref())?,
        StageArgs::Retrieve { query, k } => retrieve(ws, query, *k)?,
    };
    Ok(StageReport {
        stage: stage.name().to_string(),
        outputs,
        summary,
    })
}

type Out = (Vec<PathBuf>, Value);

fn ingest(ws: &Workspace) -> Result<Out> {
    let c = ws.load_corpus()?;
    let mut per_type: BTreeMap<&str, usize> = BTreeMap::new();
    for v in c.videos.values() {
        *per_type.entry(&v.biryani_type).or_default() += 1;
    }
    let data = json!({
        "videos": c.videos.keys().collect::<Vec<_>>(),
        "per_type": per_type,
        "segments": c.segments.len(),
        "transcripts": c.transcripts.keys().collect::<Vec<_>>(),
        "recipes": c.recipes.keys().collect::<Vec<_>>(),
        "frame_manifests": c.frames.keys().collect::<Vec<_>>(),
    });
    let p = ws.write_json(Stage::Ingest, "corpus.json", Value::Null, &data)?;
    Ok((
        vec![p],
        json!({"videos": c.videos.len(), "segments": c.segments.len()}),
    ))
}

fn stats(ws: &Workspace) -> Result<Out> {
    let c = ws.load_corpus()?;
    let s = corpus_statistics(&c, ws.config.duration_bin_s, &ws.config.stop_words());
    let p = ws.write_json(Stage::Stats, "corpus_stats.json", Value::Null, &s)?;
    Ok((
        vec![p],
        json!({"videos": s.video_count, "segments": s.segment_count, "actions": s.action_count}),
    ))
}

fn canonicalize(ws: &Workspace) -> Result<Out> {
    let c = ws.load_corpus()?;
    let prov = ws.providers()?;
    let cfg = &ws.config.clustering;
    let phrases: Vec<String> = c.segments.iter().flat_map(|s| s.actions.iter().cloned()).collect();
    let mut clusters = cluster_actions(&phrases, &*prov.embedder, cfg)?;
    let mut outputs = Vec::new();
    if cfg.refine {
        let mut refined: Vec<ActionCluster> = Vec::new();
        let mut outcomes: BTreeMap<String, RefineOutcome> = BTreeMap::new();
        for cl in clusters {
            if cl.phrases.len() < 2 {
                refined.push(cl);
                continue;
            }
            let outcome = refine_cluster(&cl, &*prov.chat, &*prov.embedder, cfg)?;
            match &outcome {
                RefineOutcome::Split { clusters } => refined.extend(clusters.iter().cloned()),
                _ => refined.push(cl.clone()),
            }
            outcomes.insert(cl.canonical_label.clone(), outcome);
        }
        refined.sort_by(|a, b| a.phrases[0].cmp(&b.phrases[0]));
        clusters = refined;
        outputs.push(ws.write_json(Stage::Canonicalize, "refine.json", Value::Null, &outcomes)?);
    }
    attach_clips(&mut clusters, &c);
    let map = to_action_map(&clusters);
    outputs.push(ws.write_json(Stage::Canonicalize, "action_map.json", Value::Null, &map)?);
    let unique: BTreeSet<&String> = phrases.iter().collect();
    Ok((
        outputs,
        json!({"phrases": unique.len(), "clusters": clusters.len()}),
    ))
}

fn load_clusters(ws: &Workspace) -> Result<Vec<ActionCluster>> {
    let map: ActionMap = ws.read_json(Stage::Canonicalize, "action_map.json")?;
    Ok(from_action_map(map))
}

fn merge(ws: &Workspace) -> Result<Out> {
    let c = ws.load_corpus()?;
    let labels = label_lookup(&load_clusters(ws)?);
    let labeled = labeled_segments(&c, &labels);
    let spans = merge_consecutive(&labeled)?;
    let summary = json!({
        "segments": c.segments.len(),
        "labeled_segments": labeled.len(),
        "spans": spans.len(),
        "reduction_pct": if labeled.is_empty() { 0.0 } else {
            crate::verify::round2(100.0 * (labeled.len() - spans.len()) as f64 / labeled.len() as f64)
        },
    });
    let p = ws.write_json(Stage::Merge, "summary.json", Value::Null, &summary)?;
    ws.write_jsonl_set(Stage::Merge, Value::Null, &[("spans.jsonl", to_jsonl(&spans)?)])?;
    Ok((vec![p, ws.stage_dir(Stage::Merge).join("spans.jsonl")], summary))
}

fn load_spans(ws: &Workspace) -> Result<Vec<MergedSpan>> {
    ws.read_jsonl(Stage::Merge, "spans.jsonl")
}

fn verify_auto(ws: &Workspace, max_frames: Option<usize>) -> Result<Out> {
    let c = ws.load_corpus()?;
    let prov = ws.providers()?;
    let spans = load_spans(ws)?;
    let max_frames = max_frames.unwrap_or(ws.config.verify.max_frames);
    let targets = verify_targets(&spans, &c);
    let records = verify_all(&targets, &*prov.vision, max_frames, ws.config.providers.vision.max_in_flight);
    let stats = verification_statistics(&records);
    let params = json!({"max_frames": max_frames});
    let p = ws.write_json(Stage::VerifyAuto, "stats.json", params.clone(), &stats)?;
    ws.write_jsonl_set(Stage::VerifyAuto, params, &[("records.jsonl", to_jsonl(&records)?)])?;
    Ok((
        vec![p, ws.stage_dir(Stage::VerifyAuto).join("records.jsonl")],
        serde_json::to_value(&stats.overall)?,
    ))
}

fn overlapping(sentences: &[Sentence], start: u32, end: u32) -> Vec<&Sentence> {
    sentences
        .iter()
        .filter(|s| s.start < end as f64 && s.end > start as f64)
        .collect()
}

fn align_video(ws: &Workspace, c: &Corpus, video: &str, prov: &super::Providers) -> Result<AlignmentExport> {
    let recipe = c
        .recipe_for(video)
        .ok_or_else(|| Error::NotFound(format!("recipe for {}", c.biryani_of(video))))?;
    let transcript = c
        .transcripts
        .get(video)
        .ok_or_else(|| Error::NotFound(format!("transcript for {video}")))?;
    let stop = ws.config.stop_words();
    let step_texts: Vec<String> = recipe.steps.iter().map(|s| s.text()).collect();
    let step_ids: Vec<String> = recipe.steps.iter().map(|s| s.id.clone()).collect();
    let sentence_texts: Vec<String> = transcript.sentences.iter().map(|s| s.text.clone()).collect();
    let step_vecs = embed_all(&step_texts, &*prov.embedder)?;
    let sentence_vecs = embed_all(&sentence_texts, &*prov.embedder)?;
    let dtw = dtw_align(&step_vecs, &sentence_vecs)?;

    let segs = c.segments_of(video);
    let mut misc_only = BTreeSet::new();
    let mut chunk_phrases: Vec<String> = Vec::new();
    for seg in segs {
        let window = overlapping(&transcript.sentences, seg.timestamp.start, seg.timestamp.end);
        let texts: Vec<String> = if window.is_empty() {
            sentence_texts.clone()
        } else {
            window.iter().map(|s| s.text.clone()).collect()
        };
        let keywords: Vec<String> = seg.keywords().map(str::to_string).collect();
        if coarse_filter(&keywords, &texts, &step_texts, ws.config.align.min_overlap, &stop).route_to_misc {
            misc_only.insert(seg.id());
        }
        chunk_phrases.extend(seg.actions.iter().cloned());
    }
    let unique: Vec<String> = chunk_phrases.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    let vecs = embed_all(&unique, &*prov.assign_embedder)?;
    let assign_steps = if Arc::ptr_eq(&prov.embedder, &prov.assign_embedder) {
        step_vecs.clone()
    } else {
        embed_all(&step_texts, &*prov.assign_embedder)?
    };
    let lookup: BTreeMap<&str, &crate::providers::Embedding> = unique.iter().map(String::as_str).zip(&vecs).collect();
    let chunks: Vec<ChunkInput> = segs
        .iter()
        .map(|s| ChunkInput {
            segment_id: s.id(),
            start_s: s.timestamp.start,
            actions: s.actions.iter().map(|a| lookup[a.as_str()].clone()).collect(),
        })
        .collect();
    let assignments = assign_chunks(&chunks, &assign_steps, &step_ids, recipe.misc_index(), &misc_only)?;
    let similarity = SimilarityMatrix::from_embeddings(step_ids.clone(), &step_vecs, &sentence_vecs)?;
    Ok(AlignmentExport {
        video_id: video.to_string(),
        path: dtw.path.iter().map(|&(i, j)| [i, j]).collect(),
        cost: dtw.total_cost,
        assignments,
        steps: step_ids,
        similarity,
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AlignIndex {
    pub videos: Vec<String>,
    pub skipped: BTreeMap<String, String>,
}

fn align(ws: &Workspace) -> Result<Out> {
    let c = ws.load_corpus()?;
    let prov = ws.providers()?;
    let mut index = AlignIndex::default();
    let mut outputs = Vec::new();
    for video in c.videos.keys() {
        match align_video(ws, &c, video, &prov) {
            Ok(export) => {
                outputs.push(ws.write_json(Stage::Align, &format!("{video}.json"), Value::Null, &export)?);
                index.videos.push(video.clone());
            }
            Err(e @ Error::NotFound(_)) => {
                log::warn!("align skipped {video}: {e}");
                index.skipped.insert(video.clone(), e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    outputs.push(ws.write_json(Stage::Align, "index.json", Value::Null, &index)?);
    Ok((
        outputs,
        json!({"aligned": index.videos.len(), "skipped": index.skipped.len()}),
    ))
}

/// Segment id to assigned step id, across every aligned video.
fn segment_steps(ws: &Workspace) -> Result<BTreeMap<String, String>> {
    let index: AlignIndex = ws.read_json(Stage::Align, "index.json")?;
    let mut out = BTreeMap::new();
    for v in &index.videos {
        let e: AlignmentExport = ws.read_json(Stage::Align, &format!("{v}.json"))?;
        out.extend(e.assignments.into_iter().map(|a| (a.segment, a.step)));
    }
    Ok(out)
}

fn compare(ws: &Workspace, seed: u64, max_pairs: Option<usize>, k_frames: Option<usize>) -> Result<Out> {
    let c = ws.load_corpus()?;
    let prov = ws.providers()?;
    let spans = load_spans(ws)?;
    let mut cfg = ws.config.compare.clone();
    if let Some(m) = max_pairs {
        cfg.max_pairs = (m > 0).then_some(m);
    }
    if let Some(k) = k_frames {
        cfg.k_frames = k;
    }
    let classes = class_clips(&spans, &c);
    let run = run_comparisons(
        &classes,
        &CompareProviders {
            chat: &*prov.chat,
            vision: &*prov.vision,
            embedder: &*prov.embedder,
        },
        &cfg,
        seed,
    )?;
    let summary = aggregate_results(&run.results);
    let seg_steps = segment_steps(ws)?;
    let mut maps = Vec::new();
    for (btype, recipe) in &c.recipes {
        let type_spans: Vec<MergedSpan> = spans
            .iter()
            .filter(|s| c.biryani_of(&s.video_id) == btype)
            .cloned()
            .collect();
        let action_steps = action_steps_from_assignments(&type_spans, &seg_steps, recipe);
        let results: Vec<ComparisonResult> = run
            .results
            .iter()
            .filter(|r| &r.clip_a.biryani_type == btype || &r.clip_b.biryani_type == btype)
            .cloned()
            .collect();
        maps.push(stage_variation_map(&results, recipe, &action_steps));
    }
    let params = json!({"seed": seed, "max_pairs": cfg.max_pairs, "k_frames": cfg.k_frames});
    let outputs = vec![
        ws.write_json(Stage::Compare, "proposals.json", params.clone(), &run.proposals)?,
        ws.write_json(Stage::Compare, "manifest.json", params.clone(), &run.manifest)?,
        ws.write_json(Stage::Compare, "summary.json", params.clone(), &summary)?,
        ws.write_json(Stage::Compare, "variation_map.json", params.clone(), &maps)?,
        ws.stage_dir(Stage::Compare).join("results.jsonl"),
    ];
    ws.write_jsonl_set(Stage::Compare, params, &[("results.jsonl", to_jsonl(&run.results)?)])?;
    Ok((outputs, serde_json::to_value(&summary)?))
}

pub fn load_comparisons(ws: &Workspace) -> Result<Vec<ComparisonResult>> {
    ws.read_jsonl(Stage::Compare, "results.jsonl")
}

/// Review sessions over the workspace's comparison results.
pub fn review_store(ws: &Workspace) -> Result<ReviewStore> {
    let c = ws.load_corpus()?;
    let pool = review_pool(&load_comparisons(ws)?, &c);
    ReviewStore::open(ws.stage_dir(Stage::ReviewServe), pool)
}

/// The review API with frames served from `frames/`.
pub fn review_router(ws: &Workspace, ui_dir: Option<PathBuf>) -> Result<axum::Router> {
    let store = review_store(ws)?;
    Ok(crate::verify::router(Arc::new(store), Some(ws.root.join("frames")), ui_dir))
}

/// Accepts a JSON array of ids or `{"keep": [...]}`.
fn read_curation(path: &Path) -> Result<Option<BTreeSet<String>>> {
    if !path.is_file() {
        return Ok(None);
    }
    let v: Value = parse_json_file(path)?;
    let arr = match &v {
        Value::Array(a) => a,
        Value::Object(o) => o
            .get("keep")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Validation(format!("{}: expected a `keep` array", path.display())))?,
        _ => return Err(Error::Validation(format!("{}: expected an array of ids", path.display()))),
    };
    arr.iter()
        .map(|x| {
            x.as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::Validation(format!("{}: ids must be strings", path.display())))
        })
        .collect::<Result<_>>()
        .map(Some)
}

fn qa_gen(ws: &Workspace, seed: u64, tiers: &[Tier]) -> Result<Out> {
    let c = ws.load_corpus()?;
    let prov = ws.providers()?;
    let mut cfg = ws.config.qa.clone();
    if !tiers.is_empty() {
        cfg.tiers = tiers.to_vec();
    }
    let curation = read_curation(&ws.root.join("annotations/easy_curation.json"))?;
    let out = generate_dataset(&c, &*prov.chat, &cfg, seed, curation.as_ref())?;
    let stats = dataset_statistics(&out.manifest);
    let tier_names: Vec<&str> = cfg.tiers.iter().map(|t| t.name()).collect();
    let params = json!({"seed": seed, "tiers": tier_names});
    let outputs = vec![
        ws.write_json(Stage::QaGen, "summaries.json", params.clone(), &out.summaries)?,
        ws.write_json(Stage::QaGen, "flags.json", params.clone(), &out.flags)?,
        ws.write_json(Stage::QaGen, "stats.json", params.clone(), &stats)?,
        ws.stage_dir(Stage::QaGen).join("easy_candidates.jsonl"),
        ws.stage_dir(Stage::QaGen).join("manifest.jsonl"),
    ];
    ws.write_jsonl_set(
        Stage::QaGen,
        params,
        &[
            ("easy_candidates.jsonl", to_jsonl(&out.easy_candidates)?),
            ("manifest.jsonl", to_jsonl(&out.manifest)?),
        ],
    )?;
    Ok((outputs, serde_json::to_value(&stats)?))
}

#[derive(Deserialize)]
struct AnswerRow {
    id: String,
    answer: String,
}

fn resolve(ws: &Workspace, p: &Path) -> PathBuf {
    if p.is_relative() && !p.exists() {
        ws.root.join(p)
    } else {
        p.to_path_buf()
    }
}

fn qa_eval(ws: &Workspace, answers: &Path, manifest: Option<&Path>) -> Result<Out> {
    let prov = ws.providers()?;
    let answers = resolve(ws, answers);
    if !answers.is_file() {
        return Err(Error::NotFound(format!("answers file {}", answers.display())));
    }
    let rows: Vec<AnswerRow> = read_jsonl_file(&answers)?;
    let manifest_pairs: Vec<QAPair> = match manifest {
        Some(m) => read_jsonl_file(&resolve(ws, m))?,
        None => ws.read_jsonl(Stage::QaGen, "manifest.jsonl")?,
    };
    let model = answers
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let pairs: Vec<(String, String)> = rows.into_iter().map(|r| (r.id, r.answer)).collect();
    let report = evaluate_run(&model, &pairs, &manifest_pairs, &*prov.embedder, &ws.config.eval)?;
    let p = ws.write_json(Stage::QaEval, &format!("eval/{}.json", slug(&model)), Value::Null, &report)?;
    Ok((vec![p], serde_json::to_value(&report)?))
}

fn retrieve(ws: &Workspace, query: &str, k: usize) -> Result<Out> {
    let prov = ws.providers()?;
    let clusters = load_clusters(ws)?;
    let hits = retrieve_clips(query, &clusters, &*prov.embedder, k)?;
    let params = json!({"query": query, "k": k});
    let p = ws.write_json(Stage::Retrieve, &format!("{}.json", slug(query)), params, &hits)?;
    let ranked: Vec<Value> = hits
        .iter()
        .flat_map(|h| {
            h.clips
                .iter()
                .map(move |c| json!({"label": h.label, "score": h.score, "video": c.video, "timestamp": c.timestamp, "url": c.url}))
        })
        .collect();
    Ok((vec![p], json!({"query": query, "clips": ranked})))
}
