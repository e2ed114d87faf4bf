//! Workspace convention, stage DAG and derived-artifact bookkeeping.
//!
//! Inputs live in `annotations/`, `transcripts/`, `recipes/` and `frames/`;
//! every stage writes under `derived/<stage>/`. JSON outputs carry an
//! envelope with the config hash; JSONL outputs are covered by a
//! `_stamp.json` in the same directory.

pub mod logger;
pub mod mock;
pub mod stages;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::canonicalize::ClusteringConfig;
use crate::compare::CompareConfig;
use crate::corpus::{Corpus, DEFAULT_CATEGORIES};
use crate::error::{parse_json_file, Error, Result};
use crate::providers::cache::{CachedChat, CachedVision, ResponseCache};
use crate::providers::http::{HttpProvider, ProviderConfig, ProviderKind};
use crate::providers::mock::HashedEmbedder;
use crate::providers::synthetic::{SyntheticChat, SyntheticVision};
use crate::providers::{ChatProvider, EmbeddingProvider, VisionProvider};
use crate::qa::{EvalConfig, QaGenConfig};
use crate::text::StopWords;

pub use stages::{run_stage, StageArgs, StageReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Stats,
    Canonicalize,
    Merge,
    VerifyAuto,
    Align,
    Compare,
    ReviewServe,
    QaGen,
    QaEval,
    Retrieve,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Ingest,
        Stage::Stats,
        Stage::Canonicalize,
        Stage::Merge,
        Stage::VerifyAuto,
        Stage::Align,
        Stage::Compare,
        Stage::ReviewServe,
        Stage::QaGen,
        Stage::QaEval,
        Stage::Retrieve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Stats => "stats",
            Stage::Canonicalize => "canonicalize",
            Stage::Merge => "merge",
            Stage::VerifyAuto => "verify-auto",
            Stage::Align => "align",
            Stage::Compare => "compare",
            Stage::ReviewServe => "review-serve",
            Stage::QaGen => "qa-gen",
            Stage::QaEval => "qa-eval",
            Stage::Retrieve => "retrieve",
        }
    }

    pub fn dir(self) -> &'static str {
        match self {
            Stage::VerifyAuto => "verify",
            Stage::ReviewServe => "sessions",
            Stage::QaGen | Stage::QaEval => "qa",
            other => other.name(),
        }
    }

    pub fn prerequisites(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Stats | Stage::Canonicalize | Stage::QaGen => &[Stage::Ingest],
            Stage::Merge | Stage::Align | Stage::Retrieve => &[Stage::Canonicalize],
            Stage::VerifyAuto => &[Stage::Merge],
            Stage::Compare => &[Stage::Canonicalize, Stage::Merge, Stage::Align],
            Stage::ReviewServe => &[Stage::Compare],
            Stage::QaEval => &[Stage::QaGen],
        }
    }

    /// File whose presence marks the stage as done.
    pub fn marker(self) -> Option<&'static str> {
        match self {
            Stage::Ingest => Some("ingest/corpus.json"),
            Stage::Stats => Some("stats/corpus_stats.json"),
            Stage::Canonicalize => Some("canonicalize/action_map.json"),
            Stage::Merge => Some("merge/_stamp.json"),
            Stage::VerifyAuto => Some("verify/_stamp.json"),
            Stage::Align => Some("align/index.json"),
            Stage::Compare => Some("compare/_stamp.json"),
            Stage::QaGen => Some("qa/_stamp.json"),
            Stage::ReviewServe | Stage::QaEval | Stage::Retrieve => None,
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProvidersConfig {
    pub chat: ProviderConfig,
    pub vision: ProviderConfig,
    pub embedding: ProviderConfig,
    /// Encoder for chunk-to-step assignment; `None` reuses `embedding`.
    pub assignment_embedding: Option<ProviderConfig>,
    /// Response cache for HTTP providers, relative to the workspace.
    pub cache_dir: String,
    /// How often the mock vision model answers "yes", per thousand.
    pub mock_yes_per_mille: u64,
}

impl Default for ProvidersConfig {
    fn default() -> Self {
        let named = |n: &str| ProviderConfig {
            name: n.into(),
            ..Default::default()
        };
        Self {
            chat: named("chat"),
            vision: named("vision"),
            embedding: named("embedding"),
            assignment_embedding: None,
            cache_dir: ".procflow-cache".into(),
            mock_yes_per_mille: 780,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    pub min_overlap: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self { min_overlap: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub max_frames: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { max_frames: 20 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkspaceConfig {
    pub categories: Vec<String>,
    pub stop_words: Option<Vec<String>>,
    pub duration_bin_s: u32,
    pub providers: ProvidersConfig,
    pub clustering: ClusteringConfig,
    pub align: AlignConfig,
    pub verify: VerifyConfig,
    pub compare: CompareConfig,
    pub qa: QaGenConfig,
    pub eval: EvalConfig,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        Self {
            categories: DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            stop_words: None,
            duration_bin_s: 60,
            providers: ProvidersConfig::default(),
            clustering: ClusteringConfig::default(),
            align: AlignConfig::default(),
            verify: VerifyConfig::default(),
            compare: CompareConfig::default(),
            qa: QaGenConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl WorkspaceConfig {
    pub fn stop_words(&self) -> StopWords {
        match &self.stop_words {
            Some(w) => StopWords::new(w),
            None => StopWords::default(),
        }
    }

    /// SHA-256 over the canonical serialization of the parsed config, so
    /// formatting and key order in the file do not matter.
    pub fn hash(&self) -> Result<String> {
        let v = serde_json::to_value(self)?;
        let bytes = serde_json::to_vec(&canonical(v))?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}

fn canonical(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let sorted: BTreeMap<String, Value> = m.into_iter().map(|(k, v)| (k, canonical(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        other => other,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub config_hash: String,
    pub stage: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
    pub data: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stamp {
    pub config_hash: String,
    pub stage: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
    /// File name to SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
}

/// Chat, vision and text-embedding handles built from the config.
#[derive(Clone)]
pub struct Providers {
    pub chat: Arc<dyn ChatProvider>,
    pub vision: Arc<dyn VisionProvider>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    /// Chunk-to-step assignment channel.
    pub assign_embedder: Arc<dyn EmbeddingProvider>,
}

pub struct Workspace {
    pub root: PathBuf,
    pub config: WorkspaceConfig,
    pub config_hash: String,
}

impl Workspace {
    /// `config` defaults to `<root>/procflow.json`; a missing default file
    /// means default settings.
    pub fn open(root: impl Into<PathBuf>, config: Option<&Path>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::NotFound(format!("workspace {}", root.display())));
        }
        let config = match config {
            Some(p) => parse_json_file(p)?,
            None => {
                let p = root.join("procflow.json");
                if p.is_file() {
                    parse_json_file(&p)?
                } else {
                    WorkspaceConfig::default()
                }
            }
        };
        for p in [&config.providers.chat, &config.providers.vision, &config.providers.embedding]
            .into_iter()
            .chain(config.providers.assignment_embedding.as_ref())
        {
            p.validate()?;
        }
        config.clustering.validate()?;
        let config_hash = config.hash()?;
        Ok(Self {
            root,
            config,
            config_hash,
        })
    }

    pub fn derived(&self) -> PathBuf {
        self.root.join("derived")
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.derived().join(stage.dir())
    }

    pub fn load_corpus(&self) -> Result<Corpus> {
        Corpus::load(&self.root, &self.config.categories)
    }

    pub fn providers(&self) -> Result<Providers> {
        let pc = &self.config.providers;
        let cache = ResponseCache::new(self.root.join(&pc.cache_dir));
        let chat: Arc<dyn ChatProvider> = match pc.chat.kind {
            ProviderKind::Mock => Arc::new(SyntheticChat),
            ProviderKind::Http => Arc::new(CachedChat::new(
                HttpProvider::from_config(pc.chat.clone())?,
                cache.clone(),
                pc.chat.endpoint.clone(),
                pc.chat.temperature,
            )),
        };
        let vision: Arc<dyn VisionProvider> = match pc.vision.kind {
            ProviderKind::Mock => Arc::new(SyntheticVision {
                yes_per_mille: pc.mock_yes_per_mille,
            }),
            ProviderKind::Http => Arc::new(CachedVision::new(
                HttpProvider::from_config(pc.vision.clone())?,
                cache,
                pc.vision.endpoint.clone(),
                pc.vision.temperature,
            )),
        };
        let embedder = embedding_provider(&pc.embedding)?;
        let assign_embedder = match &pc.assignment_embedding {
            Some(c) => embedding_provider(c)?,
            None => embedder.clone(),
        };
        Ok(Providers {
            chat,
            vision,
            embedder,
            assign_embedder,
        })
    }

    fn recorded_hash(&self, stage: Stage) -> Result<Option<String>> {
        let Some(marker) = stage.marker() else {
            return Ok(None);
        };
        let p = self.derived().join(marker);
        if !p.is_file() {
            return Ok(None);
        }
        let v: Value = parse_json_file(&p)?;
        Ok(v.get("config_hash").and_then(Value::as_str).map(str::to_string))
    }

    /// Prerequisites must exist; they, and any earlier output of `stage`,
    /// must come from the current config unless `force` is set.
    pub fn check_ready(&self, stage: Stage, force: bool) -> Result<()> {
        for &pre in stage.prerequisites() {
            match self.recorded_hash(pre)? {
                None => {
                    return Err(Error::Dependency {
                        stage: stage.name().into(),
                        prerequisite: pre.name().into(),
                    })
                }
                Some(h) if h != self.config_hash && !force => {
                    return Err(Error::ConfigMismatch(format!(
                        "output of `{}` was produced under config {}, current config is {}",
                        pre.name(),
                        short(&h),
                        short(&self.config_hash)
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(h) = self.recorded_hash(stage)? {
            if h != self.config_hash && !force {
                return Err(Error::ConfigMismatch(format!(
                    "existing output of `{}` was produced under config {}, current config is {}",
                    stage.name(),
                    short(&h),
                    short(&self.config_hash)
                )));
            }
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, stage: Stage, name: &str, params: Value, data: &T) -> Result<PathBuf> {
        let env = Envelope {
            config_hash: self.config_hash.clone(),
            stage: stage.name().to_string(),
            params,
            data,
        };
        let path = self.stage_dir(stage).join(name);
        write_bytes(&path, &to_pretty(&env)?)?;
        Ok(path)
    }

    pub fn read_json<T: DeserializeOwned>(&self, stage: Stage, name: &str) -> Result<T> {
        let path = self.stage_dir(stage).join(name);
        if !path.is_file() {
            return Err(Error::Dependency {
                stage: "current".into(),
                prerequisite: stage.name().into(),
            });
        }
        let env: Envelope<T> = parse_json_file(&path)?;
        Ok(env.data)
    }

    /// Write JSONL files for a stage, then its stamp listing their hashes.
    pub fn write_jsonl_set(&self, stage: Stage, params: Value, files: &[(&str, Vec<u8>)]) -> Result<()> {
        let dir = self.stage_dir(stage);
        let mut hashes = BTreeMap::new();
        for (name, bytes) in files {
            write_bytes(&dir.join(name), bytes)?;
            hashes.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        }
        let stamp_path = dir.join("_stamp.json");
        let mut stamp = if stamp_path.is_file() {
            parse_json_file::<Stamp>(&stamp_path)
                .ok()
                .filter(|s| s.config_hash == self.config_hash)
                .map(|s| Stamp { params: params.clone(), ..s })
        } else {
            None
        }
        .unwrap_or(Stamp {
            config_hash: self.config_hash.clone(),
            stage: stage.name().to_string(),
            params,
            files: BTreeMap::new(),
        });
        stamp.files.extend(hashes);
        write_bytes(&stamp_path, &to_pretty(&stamp)?)
    }

    pub fn read_jsonl<T: DeserializeOwned>(&self, stage: Stage, name: &str) -> Result<Vec<T>> {
        let path = self.stage_dir(stage).join(name);
        if !path.is_file() {
            return Err(Error::Dependency {
                stage: "current".into(),
                prerequisite: stage.name().into(),
            });
        }
        read_jsonl_file(&path)
    }
}

fn embedding_provider(c: &ProviderConfig) -> Result<Arc<dyn EmbeddingProvider>> {
    Ok(match c.kind {
        ProviderKind::Mock => Arc::new(HashedEmbedder::new(c.mock_dim)),
        ProviderKind::Http => Arc::new(HttpProvider::from_config(c.clone())?),
    })
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

pub fn to_pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

pub fn to_jsonl<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                index: i,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Write via a temporary file and rename.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming to {}", path.display()), e))
}
