//! Uniform interfaces to chat, vision and embedding services.
//!
//! Every embedding crossing this boundary is L2-normalized, so consumers may
//! treat cosine similarity as a plain dot product. Concrete backends are the
//! deterministic mocks in [`mock`] and [`synthetic`], and the JSON-over-HTTP
//! client in [`http`]; [`cache`] and [`retry`] wrap any of them.

pub mod cache;
pub mod embedding;
pub mod gate;
pub mod http;
pub mod mock;
pub mod retry;
pub mod synthetic;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use embedding::{cosine_distance, cosine_similarity, Embedding};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("invalid provider input: {0}")]
    Input(String),
    #[error("request failed after {attempts} attempt(s): {}", trace.join("; "))]
    Transport { attempts: u32, trace: Vec<String> },
    #[error("unusable provider response: {0}")]
    Response(String),
    #[error("no scripted response matches prompt starting {0:?}")]
    Unscripted(String),
    #[error("embedding dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("credential variable {0} is not set")]
    Credential(String),
}

/// A frame handed to a vision model or a frame-embedding lookup.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameRef {
    File(PathBuf),
    Embedding(String),
}

impl FrameRef {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        FrameRef::File(path.into())
    }

    pub fn path(&self) -> Option<&Path> {
        match self {
            FrameRef::File(p) => Some(p),
            FrameRef::Embedding(_) => None,
        }
    }
}

/// Check that every frame is an existing file, in order. Runs before any
/// request is issued.
pub fn resolve_frames(frames: &[FrameRef]) -> Result<Vec<&Path>, ProviderError> {
    if frames.is_empty() {
        return Err(ProviderError::Input("vision call needs at least one frame".into()));
    }
    frames
        .iter()
        .map(|f| match f {
            FrameRef::File(p) if p.is_file() => Ok(p.as_path()),
            FrameRef::File(p) => Err(ProviderError::Input(format!(
                "frame file {} does not exist",
                p.display()
            ))),
            FrameRef::Embedding(id) => Err(ProviderError::Input(format!(
                "frame {id} is an embedding reference, not an image"
            ))),
        })
        .collect()
}

pub trait EmbeddingProvider: Send + Sync {
    /// One unit vector per input, order preserved.
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError>;

    fn embed_one(&self, text: &str) -> Result<Embedding, ProviderError> {
        let mut v = self.embed_texts(&[text.to_string()])?;
        v.pop()
            .ok_or_else(|| ProviderError::Response("provider returned no embedding".into()))
    }
}

pub trait ChatProvider: Send + Sync {
    fn chat_complete(&self, prompt: &str) -> Result<String, ProviderError>;
}

pub trait VisionProvider: Send + Sync {
    fn vision_analyze(&self, frames: &[FrameRef], prompt: &str) -> Result<String, ProviderError>;
}

pub(crate) fn validate_texts(texts: &[String]) -> Result<(), ProviderError> {
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(ProviderError::Input(format!("text {i} is empty")));
    }
    Ok(())
}

pub(crate) fn validate_prompt(prompt: &str) -> Result<(), ProviderError> {
    if prompt.trim().is_empty() {
        return Err(ProviderError::Input("prompt is empty".into()));
    }
    Ok(())
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for std::sync::Arc<T> {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        (**self).embed_texts(texts)
    }
}

impl<T: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<T> {
    fn chat_complete(&self, prompt: &str) -> Result<String, ProviderError> {
        (**self).chat_complete(prompt)
    }
}

impl<T: VisionProvider + ?Sized> VisionProvider for std::sync::Arc<T> {
    fn vision_analyze(&self, frames: &[FrameRef], prompt: &str) -> Result<String, ProviderError> {
        (**self).vision_analyze(frames, prompt)
    }
}
