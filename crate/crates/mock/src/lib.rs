//! A deterministic stand-in for an Ollama-style model server.
//!
//! * `POST /api/embeddings {model, prompt}` returns a hashed bag-of-words
//!   vector, so texts sharing words are close in cosine.
//! * `POST /api/generate {model, prompt}` answers from an answer key: the
//!   first key (longest first) contained in the prompt selects the reply.
//! * Failures can be injected per endpoint.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MockConfig {
    pub dim: usize,
    /// Prompt substring to reply text.
    pub answers: BTreeMap<String, String>,
    pub default_answer: String,
    /// Reported as `eval_count`; omitted when `None`.
    pub token_count: Option<u64>,
    /// The first N generate calls return 500.
    pub fail_first_generates: u64,
    /// Generate calls whose prompt contains any of these return 500.
    pub fail_when_prompt_contains: Vec<String>,
    pub fail_embeddings: bool,
    /// Embedding calls whose text contains any of these return 500.
    pub fail_embedding_when_contains: Vec<String>,
    /// Return an all-zero embedding for texts containing this marker.
    pub zero_vector_marker: Option<String>,
    pub delay_ms: u64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            answers: BTreeMap::new(),
            default_answer: "I don't know.".into(),
            token_count: Some(900),
            fail_first_generates: 0,
            fail_when_prompt_contains: Vec::new(),
            fail_embeddings: false,
            fail_embedding_when_contains: Vec::new(),
            zero_vector_marker: None,
            delay_ms: 0,
        }
    }
}

#[derive(Debug, Default)]
pub struct Counters {
    pub embeddings: AtomicU64,
    pub generates: AtomicU64,
}

struct Shared {
    cfg: MockConfig,
    /// Keys sorted longest first, ties lexicographic.
    keys: Vec<String>,
    counters: Arc<Counters>,
    prompts: Mutex<Vec<String>>,
}

fn word_hash(word: &str) -> [u8; 32] {
    Sha256::digest(word.as_bytes()).into()
}

/// Hashed bag-of-words embedding: each lowercase alphanumeric token adds
/// +-1 to one bucket. A constant bias bucket keeps the vector non-zero.
pub fn embed_text(text: &str, dim: usize) -> Vec<f32> {
    let mut v = vec![0f32; dim.max(1)];
    v[0] = 0.25;
    for word in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
    {
        let h = word_hash(&word);
        let bucket = u64::from_le_bytes(h[..8].try_into().unwrap()) as usize % v.len();
        v[bucket] += if h[8] & 1 == 0 { 1.0 } else { -1.0 };
    }
    v
}

#[derive(Deserialize)]
struct PromptBody {
    #[serde(default)]
    prompt: String,
}

fn server_error(msg: &str) -> Response {
    (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": msg }))).into_response()
}

async fn embeddings(State(s): State<Arc<Shared>>, Json(body): Json<PromptBody>) -> Response {
    s.counters.embeddings.fetch_add(1, Ordering::SeqCst);
    if s.cfg.delay_ms > 0 {
        tokio::time::sleep(Duration::from_millis(s.cfg.delay_ms)).await;
    }
    if s.cfg.fail_embeddings || s.cfg.fail_embedding_when_contains.iter().any(|m| body.prompt.contains(m.as_str())) {
        return server_error("injected embedding failure");
    }
    let v = match &s.cfg.zero_vector_marker {
        Some(m) if body.prompt.contains(m.as_str()) => vec![0.0; s.cfg.dim],
        _ => embed_text(&body.prompt, s.cfg.dim),
    };
    Json(json!({ "embedding": v })).into_response()
}

async fn generate(State(s): State<Arc<Shared>>, Json(body): Json<PromptBody>) -> Response {
    let n = s.counters.generates.fetch_add(1, Ordering::SeqCst);
    if s.cfg.delay_ms > 0 {
        tokio::time::sleep(Duration::from_millis(s.cfg.delay_ms)).await;
    }
    if n < s.cfg.fail_first_generates {
        return server_error("injected generate failure");
    }
    if s.cfg.fail_when_prompt_contains.iter().any(|m| body.prompt.contains(m.as_str())) {
        return server_error("injected generate failure");
    }
    s.prompts.lock().unwrap().push(body.prompt.clone());
    let reply = s
        .keys
        .iter()
        .find(|k| body.prompt.contains(k.as_str()))
        .map(|k| s.cfg.answers[k].clone())
        .unwrap_or_else(|| s.cfg.default_answer.clone());
    let mut out = json!({ "response": reply, "done": true });
    if let Some(t) = s.cfg.token_count {
        out["eval_count"] = Value::from(t);
    }
    Json(out).into_response()
}

pub fn router(cfg: MockConfig) -> (Router, Arc<Counters>) {
    let counters = Arc::new(Counters::default());
    let mut keys: Vec<String> = cfg.answers.keys().cloned().collect();
    keys.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    let shared = Arc::new(Shared {
        cfg,
        keys,
        counters: counters.clone(),
        prompts: Mutex::new(Vec::new()),
    });
    let app = Router::new()
        .route("/", get(|| async { "Ollama is running" }))
        .route("/api/embeddings", post(embeddings))
        .route("/api/generate", post(generate))
        .route("/api/prompts", get(list_prompts))
        .with_state(shared);
    (app, counters)
}

async fn list_prompts(State(s): State<Arc<Shared>>) -> Json<Vec<String>> {
    Json(s.prompts.lock().unwrap().clone())
}

/// A mock server running on its own thread and runtime, usable from both
/// sync and async tests. Stops when dropped.
pub struct MockServer {
    addr: SocketAddr,
    counters: Arc<Counters>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl MockServer {
    pub fn start(cfg: MockConfig) -> Self {
        Self::bind(cfg, "127.0.0.1:0").expect("bind mock server")
    }

    pub fn bind(cfg: MockConfig, addr: &str) -> std::io::Result<Self> {
        let (app, counters) = router(cfg);
        let listener = std::net::TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("mock runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("mock listener");
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        });
        Ok(Self {
            addr,
            counters,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn embedding_calls(&self) -> u64 {
        self.counters.embeddings.load(Ordering::SeqCst)
    }

    pub fn generate_calls(&self) -> u64 {
        self.counters.generates.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_is_deterministic_and_word_based() {
        let a = embed_text("Aspirin inhibits COX", 16);
        assert_eq!(a, embed_text("aspirin, inhibits cox!", 16));
        assert_ne!(a, embed_text("something else entirely", 16));
        assert_eq!(a.len(), 16);
    }
}
