//! Deterministic test doubles. Every provider here is a pure function of its
//! inputs (scripted sequences aside), so runs under mocks are reproducible.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{
    resolve_frames, validate_prompt, validate_texts, ChatProvider, Embedding, EmbeddingProvider,
    FrameRef, ProviderError, VisionProvider,
};
use crate::text::tokenize;

/// Hashed bag-of-tokens embedding: each token adds 1 to the bucket picked by
/// its SHA-256, then the vector is L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    dim: usize,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

impl HashedEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim: dim.max(1) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bucket(&self, token: &str) -> usize {
        let digest = Sha256::digest(token.as_bytes());
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        (u64::from_le_bytes(word) % self.dim as u64) as usize
    }

    pub fn embed_text(&self, text: &str) -> Result<Embedding, ProviderError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(ProviderError::Input(format!("text {text:?} has no tokens")));
        }
        let mut v = vec![0.0; self.dim];
        for t in &tokens {
            v[self.bucket(t)] += 1.0;
        }
        Embedding::normalized(v)
    }
}

impl EmbeddingProvider for HashedEmbedder {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        validate_texts(texts)?;
        texts.iter().map(|t| self.embed_text(t)).collect()
    }
}

/// Hand-set vectors by exact text.
#[derive(Debug, Clone, Default)]
pub struct TableEmbedder {
    table: HashMap<String, Embedding>,
}

impl TableEmbedder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, text: impl Into<String>, values: &[f64]) -> Self {
        self.insert(text, values);
        self
    }

    pub fn insert(&mut self, text: impl Into<String>, values: &[f64]) {
        let e = Embedding::normalized(values.to_vec()).expect("nonzero test vector");
        self.table.insert(text.into(), e);
    }
}

impl EmbeddingProvider for TableEmbedder {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        validate_texts(texts)?;
        texts
            .iter()
            .map(|t| {
                self.table
                    .get(t)
                    .cloned()
                    .ok_or_else(|| ProviderError::Input(format!("no vector for {t:?}")))
            })
            .collect()
    }
}

/// Always fails; used to check error propagation.
#[derive(Debug, Clone)]
pub struct FailingProvider(pub ProviderError);

impl EmbeddingProvider for FailingProvider {
    fn embed_texts(&self, _: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        Err(self.0.clone())
    }
}

impl ChatProvider for FailingProvider {
    fn chat_complete(&self, _: &str) -> Result<String, ProviderError> {
        Err(self.0.clone())
    }
}

impl VisionProvider for FailingProvider {
    fn vision_analyze(&self, _: &[FrameRef], _: &str) -> Result<String, ProviderError> {
        Err(self.0.clone())
    }
}

type Reply = Result<String, ProviderError>;

#[derive(Debug)]
struct Rule {
    needle: String,
    replies: Mutex<VecDeque<Reply>>,
}

impl Rule {
    /// Pops scripted replies in order; the last one repeats forever.
    fn next(&self) -> Reply {
        let mut q = self.replies.lock().unwrap_or_else(|e| e.into_inner());
        if q.len() > 1 {
            q.pop_front().expect("non-empty")
        } else {
            q.front().cloned().expect("rule has at least one reply")
        }
    }
}

/// Chat mock keyed by prompt substring; the first matching rule wins.
#[derive(Debug, Default)]
pub struct ScriptedChat {
    rules: Vec<Rule>,
    calls: AtomicUsize,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedChat {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on(self, needle: impl Into<String>, reply: impl Into<String>) -> Self {
        self.on_sequence(needle, vec![Ok(reply.into())])
    }

    pub fn on_sequence(mut self, needle: impl Into<String>, replies: Vec<Reply>) -> Self {
        assert!(!replies.is_empty(), "scripted rule needs a reply");
        self.rules.push(Rule {
            needle: needle.into(),
            replies: Mutex::new(replies.into()),
        });
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl ChatProvider for ScriptedChat {
    fn chat_complete(&self, prompt: &str) -> Result<String, ProviderError> {
        validate_prompt(prompt)?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.prompts
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(prompt.to_string());
        self.rules
            .iter()
            .find(|r| prompt.contains(&r.needle))
            .map(Rule::next)
            .unwrap_or_else(|| Err(ProviderError::Unscripted(prompt.chars().take(60).collect())))
    }
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Vision mock keyed on (frame count, prompt hash), with substring fallbacks.
#[derive(Debug, Default)]
pub struct ScriptedVision {
    exact: HashMap<(usize, String), String>,
    substring: Vec<(String, String)>,
    require_files: bool,
    calls: Mutex<Vec<(Vec<FrameRef>, String)>>,
}

impl ScriptedVision {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reject frames that are not existing files, like a real client would.
    pub fn requiring_files(mut self) -> Self {
        self.require_files = true;
        self
    }

    pub fn on_exact(mut self, frame_count: usize, prompt: &str, reply: impl Into<String>) -> Self {
        self.exact.insert((frame_count, prompt_hash(prompt)), reply.into());
        self
    }

    pub fn on(mut self, needle: impl Into<String>, reply: impl Into<String>) -> Self {
        self.substring.push((needle.into(), reply.into()));
        self
    }

    pub fn calls(&self) -> Vec<(Vec<FrameRef>, String)> {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl VisionProvider for ScriptedVision {
    fn vision_analyze(&self, frames: &[FrameRef], prompt: &str) -> Result<String, ProviderError> {
        validate_prompt(prompt)?;
        if frames.is_empty() {
            return Err(ProviderError::Input("vision call needs at least one frame".into()));
        }
        if self.require_files {
            resolve_frames(frames)?;
        }
        self.calls
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push((frames.to_vec(), prompt.to_string()));
        if let Some(r) = self.exact.get(&(frames.len(), prompt_hash(prompt))) {
            return Ok(r.clone());
        }
        self.substring
            .iter()
            .find(|(n, _)| prompt.contains(n.as_str()))
            .map(|(_, r)| Ok(r.clone()))
            .unwrap_or_else(|| Err(ProviderError::Unscripted(prompt.chars().take(60).collect())))
    }
}

/// Chat provider backed by a closure.
pub struct FnChat<F>(pub F);

impl<F> ChatProvider for FnChat<F>
where
    F: Fn(&str) -> Result<String, ProviderError> + Send + Sync,
{
    fn chat_complete(&self, prompt: &str) -> Result<String, ProviderError> {
        validate_prompt(prompt)?;
        (self.0)(prompt)
    }
}

/// Vision provider backed by a closure.
pub struct FnVision<F>(pub F);

impl<F> VisionProvider for FnVision<F>
where
    F: Fn(&[FrameRef], &str) -> Result<String, ProviderError> + Send + Sync,
{
    fn vision_analyze(&self, frames: &[FrameRef], prompt: &str) -> Result<String, ProviderError> {
        validate_prompt(prompt)?;
        (self.0)(frames, prompt)
    }
}
