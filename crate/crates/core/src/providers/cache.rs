//! Flat-file response cache keyed by content hash.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{ChatProvider, FrameRef, ProviderError, VisionProvider};

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Hash of length-prefixed parts, so ("ab","c") and ("a","bc") differ.
    pub fn key(parts: &[&[u8]]) -> String {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        hex::encode(h.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.txt"))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        fs::read_to_string(self.path_for(key)).ok()
    }

    /// Write once, then rename into place.
    pub fn put(&self, key: &str, value: &str) -> std::io::Result<()> {
        let path = self.path_for(key);
        if path.exists() {
            return Ok(());
        }
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent)?;
        let tmp = parent.join(format!(".{key}.{}.tmp", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(value.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)
    }
}

fn frame_fingerprint(frames: &[FrameRef]) -> Vec<u8> {
    let mut h = Sha256::new();
    for f in frames {
        match f {
            FrameRef::File(p) => {
                h.update(b"file:");
                h.update(p.to_string_lossy().as_bytes());
                if let Ok(bytes) = fs::read(p) {
                    h.update(Sha256::digest(&bytes));
                }
            }
            FrameRef::Embedding(id) => {
                h.update(b"emb:");
                h.update(id.as_bytes());
            }
        }
        h.update([0]);
    }
    h.finalize().to_vec()
}

/// Caches chat replies by (endpoint, prompt, temperature).
pub struct CachedChat<P> {
    inner: P,
    cache: ResponseCache,
    endpoint: String,
    temperature: f64,
}

impl<P> CachedChat<P> {
    pub fn new(inner: P, cache: ResponseCache, endpoint: impl Into<String>, temperature: f64) -> Self {
        Self {
            inner,
            cache,
            endpoint: endpoint.into(),
            temperature,
        }
    }
}

impl<P: ChatProvider> ChatProvider for CachedChat<P> {
    fn chat_complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let key = ResponseCache::key(&[
            b"chat",
            self.endpoint.as_bytes(),
            prompt.as_bytes(),
            &self.temperature.to_le_bytes(),
        ]);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let reply = self.inner.chat_complete(prompt)?;
        if let Err(e) = self.cache.put(&key, &reply) {
            log::warn!("response cache write failed: {e}");
        }
        Ok(reply)
    }
}

/// Caches vision replies by (endpoint, prompt, temperature, frame contents).
pub struct CachedVision<P> {
    inner: P,
    cache: ResponseCache,
    endpoint: String,
    temperature: f64,
}

impl<P> CachedVision<P> {
    pub fn new(inner: P, cache: ResponseCache, endpoint: impl Into<String>, temperature: f64) -> Self {
        Self {
            inner,
            cache,
            endpoint: endpoint.into(),
            temperature,
        }
    }
}

impl<P: VisionProvider> VisionProvider for CachedVision<P> {
    fn vision_analyze(&self, frames: &[FrameRef], prompt: &str) -> Result<String, ProviderError> {
        let key = ResponseCache::key(&[
            b"vision",
            self.endpoint.as_bytes(),
            prompt.as_bytes(),
            &self.temperature.to_le_bytes(),
            &frame_fingerprint(frames),
        ]);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let reply = self.inner.vision_analyze(frames, prompt)?;
        if let Err(e) = self.cache.put(&key, &reply) {
            log::warn!("response cache write failed: {e}");
        }
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;

    struct Counting(AtomicUsize);

    impl ChatProvider for Counting {
        fn chat_complete(&self, prompt: &str) -> Result<String, ProviderError> {
            let n = self.0.fetch_add(1, Ordering::SeqCst);
            Ok(format!("{prompt}#{n}"))
        }
    }

    #[test]
    fn one_request_per_distinct_key() {
        let dir = tempfile::tempdir().unwrap();
        let chat = CachedChat::new(
            Counting(AtomicUsize::new(0)),
            ResponseCache::new(dir.path()),
            "http://x",
            0.0,
        );
        let a1 = chat.chat_complete("a").unwrap();
        let a2 = chat.chat_complete("a").unwrap();
        let b = chat.chat_complete("b").unwrap();
        assert_eq!(a1, a2);
        assert_eq!(a1.as_bytes(), a2.as_bytes());
        assert_ne!(a1, b);
        assert_eq!(chat.inner.0.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn key_is_length_prefixed() {
        assert_ne!(
            ResponseCache::key(&[b"ab", b"c"]),
            ResponseCache::key(&[b"a", b"bc"])
        );
    }

    #[test]
    fn temperature_is_part_of_the_key() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let cold = CachedChat::new(Counting(AtomicUsize::new(0)), cache.clone(), "e", 0.0);
        let warm = CachedChat::new(Counting(AtomicUsize::new(10)), cache, "e", 0.7);
        assert_ne!(cold.chat_complete("p").unwrap(), warm.chat_complete("p").unwrap());
    }
}
