//! JSON-over-HTTP provider with per-vendor request adapters.

use std::sync::{Arc, OnceLock};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::gate::InFlightGate;
use super::retry::{AttemptError, RetryPolicy};
use super::{
    resolve_frames, validate_prompt, validate_texts, ChatProvider, Embedding, EmbeddingProvider,
    FrameRef, ProviderError, VisionProvider,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    /// `{model, prompt, frames?, temperature}` → `{text}`;
    /// `{model, input}` → `{embeddings}`.
    #[default]
    Generic,
    /// `/chat/completions` and `/embeddings` in the OpenAI wire format.
    OpenaiCompatible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub name: String,
    pub kind: ProviderKind,
    pub endpoint: String,
    pub model: String,
    pub adapter: AdapterKind,
    /// Defaults to `PROCFLOW_API_KEY_<NAME>`. Secrets never live in config.
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub timeout_s: u64,
    /// Embedding dimension of the mock backend.
    pub mock_dim: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            name: "mock".into(),
            kind: ProviderKind::Mock,
            endpoint: String::new(),
            model: String::new(),
            adapter: AdapterKind::Generic,
            api_key_env: None,
            temperature: 0.0,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
            timeout_s: 120,
            mock_dim: 256,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        self.retry.validate()?;
        if !(self.temperature >= 0.0) {
            return Err(ProviderError::Input("temperature must be >= 0".into()));
        }
        if self.kind == ProviderKind::Http && self.endpoint.is_empty() {
            return Err(ProviderError::Input(format!(
                "provider {} needs an endpoint",
                self.name
            )));
        }
        Ok(())
    }

    pub fn api_key_var(&self) -> String {
        self.api_key_env.clone().unwrap_or_else(|| {
            let upper: String = self
                .name
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
                .collect();
            format!("PROCFLOW_API_KEY_{upper}")
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    Status(u16, String),
    Network(String),
}

impl TransportError {
    fn into_attempt(self) -> AttemptError {
        match self {
            TransportError::Status(code, body) if code == 429 || code >= 500 => {
                AttemptError::Retryable(format!("HTTP {code}: {body}"))
            }
            TransportError::Status(code, body) => AttemptError::Fatal(format!("HTTP {code}: {body}")),
            TransportError::Network(msg) => AttemptError::Retryable(msg),
        }
    }
}

pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<Value, TransportError>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Input(format!("http client: {e}")))?;
        Ok(Self { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<Value, TransportError> {
        let mut req = self.client.post(url).json(body);
        if let Some(token) = bearer {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(TransportError::Status(status.as_u16(), text.chars().take(300).collect()));
        }
        resp.json::<Value>()
            .map_err(|e| TransportError::Network(format!("decoding response: {e}")))
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub struct HttpProvider {
    cfg: ProviderConfig,
    transport: Arc<dyn Transport>,
    gate: InFlightGate,
    sleep: Sleeper,
    api_key: Option<String>,
    dim: OnceLock<usize>,
}

impl HttpProvider {
    /// Reads the API key from the environment; a missing key is allowed for
    /// endpoints that need none.
    pub fn from_config(cfg: ProviderConfig) -> Result<Self, ProviderError> {
        cfg.validate()?;
        let transport = ReqwestTransport::new(Duration::from_secs(cfg.timeout_s))?;
        let api_key = std::env::var(cfg.api_key_var()).ok();
        Ok(Self::with_transport(cfg, Arc::new(transport), api_key))
    }

    pub fn with_transport(cfg: ProviderConfig, transport: Arc<dyn Transport>, api_key: Option<String>) -> Self {
        let gate = InFlightGate::new(cfg.max_in_flight);
        Self {
            cfg,
            transport,
            gate,
            sleep: Arc::new(std::thread::sleep),
            api_key,
            dim: OnceLock::new(),
        }
    }

    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(sleep);
        self
    }

    pub fn gate(&self) -> &InFlightGate {
        &self.gate
    }

    fn url(&self, suffix: &str) -> String {
        match self.cfg.adapter {
            AdapterKind::Generic => self.cfg.endpoint.clone(),
            AdapterKind::OpenaiCompatible => {
                format!("{}/{}", self.cfg.endpoint.trim_end_matches('/'), suffix)
            }
        }
    }

    fn post(&self, url: &str, body: &Value) -> Result<Value, ProviderError> {
        let _permit = self.gate.acquire();
        let (v, attempts) = self.cfg.retry.run(&*self.sleep, |_| {
            self.transport
                .post_json(url, self.api_key.as_deref(), body)
                .map_err(TransportError::into_attempt)
        })?;
        if attempts > 1 {
            log::info!("{} succeeded after {attempts} attempts", self.cfg.name);
        }
        Ok(v)
    }

    fn text_request(&self, prompt: &str, images: &[String]) -> Result<String, ProviderError> {
        let (url, body) = match self.cfg.adapter {
            AdapterKind::Generic => {
                let mut body = json!({
                    "model": self.cfg.model,
                    "prompt": prompt,
                    "temperature": self.cfg.temperature,
                });
                if !images.is_empty() {
                    body["frames"] = json!(images);
                }
                (self.url(""), body)
            }
            AdapterKind::OpenaiCompatible => {
                let mut content = vec![json!({"type": "text", "text": prompt})];
                content.extend(images.iter().map(|b64| {
                    json!({"type": "image_url", "image_url": {"url": format!("data:image/jpeg;base64,{b64}")}})
                }));
                let body = json!({
                    "model": self.cfg.model,
                    "temperature": self.cfg.temperature,
                    "messages": [{"role": "user", "content": content}],
                });
                (self.url("chat/completions"), body)
            }
        };
        let resp = self.post(&url, &body)?;
        let text = match self.cfg.adapter {
            AdapterKind::Generic => resp.get("text").and_then(Value::as_str),
            AdapterKind::OpenaiCompatible => resp
                .pointer("/choices/0/message/content")
                .and_then(Value::as_str),
        };
        text.map(str::to_string)
            .ok_or_else(|| ProviderError::Response(format!("no text field in {resp}")))
    }
}

impl ChatProvider for HttpProvider {
    fn chat_complete(&self, prompt: &str) -> Result<String, ProviderError> {
        validate_prompt(prompt)?;
        self.text_request(prompt, &[])
    }
}

impl VisionProvider for HttpProvider {
    fn vision_analyze(&self, frames: &[FrameRef], prompt: &str) -> Result<String, ProviderError> {
        validate_prompt(prompt)?;
        let paths = resolve_frames(frames)?;
        let images = paths
            .iter()
            .map(|p| {
                std::fs::read(p)
                    .map(|b| base64::engine::general_purpose::STANDARD.encode(b))
                    .map_err(|e| ProviderError::Input(format!("reading {}: {e}", p.display())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.text_request(prompt, &images)
    }
}

impl EmbeddingProvider for HttpProvider {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        validate_texts(texts)?;
        let body = json!({"model": self.cfg.model, "input": texts});
        let resp = self.post(&self.url("embeddings"), &body)?;
        let rows: Vec<Vec<f64>> = match self.cfg.adapter {
            AdapterKind::Generic => serde_json::from_value(resp.get("embeddings").cloned().unwrap_or(Value::Null)),
            AdapterKind::OpenaiCompatible => resp
                .get("data")
                .and_then(Value::as_array)
                .map(|items| {
                    items
                        .iter()
                        .map(|i| serde_json::from_value(i.get("embedding").cloned().unwrap_or(Value::Null)))
                        .collect()
                })
                .unwrap_or_else(|| serde_json::from_value(Value::Null)),
        }
        .map_err(|e| ProviderError::Response(format!("embedding payload: {e}")))?;
        if rows.len() != texts.len() {
            return Err(ProviderError::Response(format!(
                "{} embeddings for {} texts",
                rows.len(),
                texts.len()
            )));
        }
        rows.into_iter()
            .map(|row| {
                let d = *self.dim.get_or_init(|| row.len());
                if row.len() != d {
                    return Err(ProviderError::Dimension(d, row.len()));
                }
                Embedding::normalized(row)
            })
            .collect()
    }
}
