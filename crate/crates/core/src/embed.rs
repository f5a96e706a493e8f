//! Embedding vectors and the client that fetches them from an external
//! provider.

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::provider::{HttpProvider, ProviderConfig, ProviderError};

#[derive(Debug, Clone, thiserror::Error)]
pub enum EmbedError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("cannot normalize a zero or non-finite vector")]
    Degenerate,
    #[error("embedding failed for item(s) {failed:?}: {first}")]
    Batch { failed: Vec<usize>, first: Box<EmbedError> },
}

/// A raw provider vector, exactly as returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(pub Vec<f32>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }
}

/// A vector with unit Euclidean norm. Only [`normalize`] constructs one from
/// arbitrary input, so inner products of two `UnitEmbedding`s are cosines.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitEmbedding(Vec<f32>);

impl UnitEmbedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    /// Wrap values already known to be unit length (e.g. read back from a
    /// checksummed index file).
    pub(crate) fn from_unit_values(values: Vec<f32>) -> Self {
        Self(values)
    }
}

pub fn l2_norm(values: &[f32]) -> f64 {
    values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
}

pub fn normalize(v: &Embedding) -> Result<UnitEmbedding, EmbedError> {
    if v.0.is_empty() {
        return Err(EmbedError::Degenerate);
    }
    let norm = l2_norm(&v.0);
    if norm == 0.0 || !norm.is_finite() {
        return Err(EmbedError::Degenerate);
    }
    Ok(UnitEmbedding(
        v.0.iter().map(|&x| (f64::from(x) / norm) as f32).collect(),
    ))
}

#[async_trait]
pub trait Embedder: Send + Sync {
    fn model_name(&self) -> &str;

    async fn embed(&self, text: &str) -> Result<Embedding, EmbedError>;
}

/// Embedding client for an HTTP provider (Ollama-style by default).
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    http: HttpProvider,
}

impl HttpEmbedder {
    pub fn new(cfg: ProviderConfig) -> Result<Self, ProviderError> {
        Ok(Self {
            http: HttpProvider::new(cfg)?,
        })
    }
}

#[async_trait]
impl Embedder for HttpEmbedder {
    fn model_name(&self) -> &str {
        &self.http.config().model_name
    }

    async fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        embed_text(&self.http, text).await
    }
}

/// Request one embedding and return it verbatim (unnormalized).
pub async fn embed_text(http: &HttpProvider, text: &str) -> Result<Embedding, EmbedError> {
    if text.is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let body = http.request_body(text, &[]);
    let reply = http.post_json(&body).await?;
    let field = &http.config().response_field;
    let values = parse_vector(&reply, field)?;
    Ok(Embedding(values))
}

fn parse_vector(reply: &Value, field: &str) -> Result<Vec<f32>, ProviderError> {
    let arr = reply
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| ProviderError::Protocol(format!("response has no array field {field:?}")))?;
    if arr.is_empty() {
        return Err(ProviderError::Protocol("provider returned an empty embedding".into()));
    }
    arr.iter()
        .map(|v| {
            v.as_f64()
                .map(|x| x as f32)
                .ok_or_else(|| ProviderError::Protocol(format!("non-numeric embedding component {v}")))
        })
        .collect()
}

/// Embed `texts` with at most `parallelism` requests in flight. Output order
/// matches input order. Every item is attempted; if any fail the error lists
/// all failed indices.
pub async fn embed_batch(
    embedder: &dyn Embedder,
    texts: &[String],
    parallelism: usize,
) -> Result<Vec<Embedding>, EmbedError> {
    let results: Vec<Result<Embedding, EmbedError>> = stream::iter(texts.iter())
        .map(|t| embedder.embed(t))
        .buffered(parallelism.max(1))
        .collect()
        .await;

    let mut out = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    let mut first = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                failed.push(i);
                first.get_or_insert(e);
            }
        }
    }
    match first {
        None => Ok(out),
        Some(e) => Err(EmbedError::Batch {
            failed,
            first: Box::new(e),
        }),
    }
}
