use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::provider::{HttpProvider, ProviderConfig, ProviderError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    pub token_count: Option<u64>,
}

#[async_trait]
pub trait Generator: Send + Sync {
    fn model_name(&self) -> &str;

    async fn generate(&self, prompt: &str) -> Result<Generation, ProviderError>;
}

/// Non-streaming completion client for an HTTP provider.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    http: HttpProvider,
}

impl HttpGenerator {
    pub fn new(cfg: ProviderConfig) -> Result<Self, ProviderError> {
        Ok(Self {
            http: HttpProvider::new(cfg)?,
        })
    }
}

#[async_trait]
impl Generator for HttpGenerator {
    fn model_name(&self) -> &str {
        &self.http.config().model_name
    }

    async fn generate(&self, prompt: &str) -> Result<Generation, ProviderError> {
        let body = self.http.request_body(prompt, &[("stream", Value::Bool(false))]);
        let reply = self.http.post_json(&body).await?;
        parse_generation(&reply, self.http.config())
    }
}

fn parse_generation(reply: &Value, cfg: &ProviderConfig) -> Result<Generation, ProviderError> {
    let text = reply
        .get(&cfg.response_field)
        .and_then(Value::as_str)
        .ok_or_else(|| ProviderError::Protocol(format!("response has no string field {:?}", cfg.response_field)))?
        .to_string();
    let token_count = cfg
        .token_count_field
        .as_ref()
        .and_then(|f| reply.get(f))
        .and_then(Value::as_u64);
    Ok(Generation { text, token_count })
}
