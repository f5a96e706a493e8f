//! JSON-over-HTTP transport shared by the embedding and generation clients.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_RETRY_BASE_MS: u64 = 250;
pub const DEFAULT_MAX_RETRIES: u32 = 3;
pub const DEFAULT_TIMEOUT_MS: u64 = 120_000;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ProviderError {
    #[error("invalid provider configuration: {0}")]
    Config(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// Where and how to reach an external model endpoint.
///
/// Path and JSON field names default to the Ollama-style wire format and can
/// be overridden for other local servers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model_name: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    #[serde(default = "default_retry_base")]
    pub retry_base_ms: u64,
    pub path: String,
    /// Request field carrying the input text.
    pub request_text_field: String,
    /// Response field carrying the output (vector or text).
    pub response_field: String,
    /// Response field carrying the generated token count, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count_field: Option<String>,
}

fn default_retry_base() -> u64 {
    DEFAULT_RETRY_BASE_MS
}

impl ProviderConfig {
    pub fn embedder(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: "mxbai-embed-large".into(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_retries: DEFAULT_MAX_RETRIES,
            retry_base_ms: DEFAULT_RETRY_BASE_MS,
            path: "/api/embeddings".into(),
            request_text_field: "prompt".into(),
            response_field: "embedding".into(),
            token_count_field: None,
        }
    }

    pub fn generator(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: "llama3.1:8b".into(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_retries: DEFAULT_MAX_RETRIES,
            retry_base_ms: DEFAULT_RETRY_BASE_MS,
            path: "/api/generate".into(),
            request_text_field: "prompt".into(),
            response_field: "response".into(),
            token_count_field: Some("eval_count".into()),
        }
    }

    pub fn endpoint(&self) -> Result<url::Url, ProviderError> {
        let base = url::Url::parse(&self.base_url)
            .map_err(|e| ProviderError::Config(format!("base_url {:?}: {e}", self.base_url)))?;
        if !matches!(base.scheme(), "http" | "https") {
            return Err(ProviderError::Config(format!(
                "base_url {:?} must use http or https",
                self.base_url
            )));
        }
        let joined = format!(
            "{}/{}",
            base.as_str().trim_end_matches('/'),
            self.path.trim_start_matches('/')
        );
        url::Url::parse(&joined).map_err(|e| ProviderError::Config(format!("endpoint {joined:?}: {e}")))
    }
}

/// A POST-JSON client with bounded exponential-backoff retries.
#[derive(Debug, Clone)]
pub struct HttpProvider {
    cfg: ProviderConfig,
    endpoint: url::Url,
    client: reqwest::Client,
}

impl HttpProvider {
    pub fn new(cfg: ProviderConfig) -> Result<Self, ProviderError> {
        let endpoint = cfg.endpoint()?;
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self {
            cfg,
            endpoint,
            client,
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    /// Build the request body `{"model": .., <text field>: text, ..extra}`.
    pub fn request_body(&self, text: &str, extra: &[(&str, Value)]) -> Value {
        let mut body = serde_json::Map::new();
        body.insert("model".into(), Value::String(self.cfg.model_name.clone()));
        body.insert(self.cfg.request_text_field.clone(), Value::String(text.to_string()));
        for (k, v) in extra {
            body.insert((*k).to_string(), v.clone());
        }
        Value::Object(body)
    }

    /// POST `body` and parse a JSON reply. Connection failures, timeouts,
    /// 429 and 5xx responses are retried; other statuses and undecodable
    /// bodies fail immediately as protocol errors.
    pub async fn post_json(&self, body: &Value) -> Result<Value, ProviderError> {
        let attempts = self.cfg.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = self.cfg.retry_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                tokio::time::sleep(Duration::from_millis(backoff)).await;
            }
            let resp = match self.client.post(self.endpoint.clone()).json(body).send().await {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status();
            if status.is_server_error() || status.as_u16() == 429 {
                last = format!("{} returned {status}", self.endpoint);
                continue;
            }
            if !status.is_success() {
                return Err(ProviderError::Protocol(format!(
                    "{} returned {status}",
                    self.endpoint
                )));
            }
            let bytes = match resp.bytes().await {
                Ok(b) => b,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            return serde_json::from_slice(&bytes)
                .map_err(|e| ProviderError::Protocol(format!("response is not JSON: {e}")));
        }
        Err(ProviderError::Transport {
            attempts,
            message: last,
        })
    }
}
