//! HTTP/JSON API for the web UI.
//!
//! | method | path                  | body / reply                                     |
//! |--------|-----------------------|--------------------------------------------------|
//! | POST   | `/api/ask`            | `{question, options?, top_k?}` -> `RagAnswer`    |
//! | GET    | `/api/session/energy` | cumulative `EnergyReport` since server start     |
//! | GET    | `/api/config`         | sanitized configuration                          |
//! | GET    | `/api/health`         | `{status, api_version, index_entries, providers_ok}` |
//!
//! Errors are `{error_code, message}` with a matching HTTP status.

use std::net::{IpAddr, SocketAddr};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ecorag_core::energy::EnergyMonitor;
use ecorag_core::rag::{AnswerOption, Attribution, PromptTemplate};
use ecorag_core::{RagEngine, RagError};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::commands::{build_engine, default_template, load_engine_index, template};
use crate::config::AppConfig;
use crate::CliError;

pub const API_VERSION: u32 = 1;

const PLACEHOLDER_PAGE: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>ecorag</title></head>\n<body><h1>ecorag</h1><p>The API is available under <code>/api/</code>. Set <code>server.static_dir</code> to serve the web UI here.</p></body></html>\n";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AskRequest {
    pub question: String,
    #[serde(default)]
    pub options: Option<Vec<AnswerOption>>,
    #[serde(default)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub error_code: String,
    pub message: String,
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (
        status,
        Json(ApiError {
            error_code: code.into(),
            message: message.into(),
        }),
    )
        .into_response()
}

fn rag_error(e: RagError) -> Response {
    match &e {
        RagError::EmptyQuestion => error(StatusCode::BAD_REQUEST, "empty_question", e.to_string()),
        RagError::ZeroTopK => error(StatusCode::BAD_REQUEST, "invalid_top_k", e.to_string()),
        _ if e.is_provider() => error(StatusCode::BAD_GATEWAY, "provider_unavailable", e.to_string()),
        _ => error(StatusCode::INTERNAL_SERVER_ERROR, "engine_error", e.to_string()),
    }
}

pub struct AppState {
    mcq: RagEngine,
    yes_no_maybe: RagEngine,
    monitor: Arc<EnergyMonitor>,
    /// Serializes asks unless the server runs in concurrent mode.
    gate: Option<tokio::sync::Mutex<()>>,
    config: serde_json::Value,
    provider_urls: Vec<String>,
    http: reqwest::Client,
}

impl AppState {
    pub fn new(cfg: &AppConfig) -> Result<Arc<Self>, CliError> {
        let index = load_engine_index(cfg)?;
        let monitor = cfg.start_monitor()?;
        let attribution = if cfg.server.concurrent {
            Attribution::SessionOnly
        } else {
            Attribution::PerQuery
        };
        let engine = |t: PromptTemplate| -> Result<RagEngine, CliError> {
            Ok(build_engine(cfg, index.clone(), monitor.clone(), template(cfg, t)?)?.with_attribution(attribution))
        };
        let ynm: Vec<AnswerOption> = ecorag_core::eval::YES_NO_MAYBE
            .iter()
            .map(|l| AnswerOption::new(*l, *l))
            .collect();
        Ok(Arc::new(Self {
            mcq: engine(default_template(None))?,
            yes_no_maybe: engine(default_template(Some(&ynm)))?,
            monitor,
            gate: (!cfg.server.concurrent).then(|| tokio::sync::Mutex::new(())),
            config: cfg.sanitized(),
            provider_urls: vec![cfg.embedder.base_url.clone(), cfg.generator.base_url.clone()],
            http: reqwest::Client::builder()
                .timeout(Duration::from_secs(2))
                .build()
                .map_err(CliError::failure)?,
        }))
    }

    pub fn monitor(&self) -> &Arc<EnergyMonitor> {
        &self.monitor
    }
}

async fn ask(State(s): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: AskRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, "invalid_request", e.to_string()),
    };
    if req.question.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "empty_question", "question must not be empty");
    }
    let options = req.options.as_deref().filter(|o| !o.is_empty());
    let engine = if default_template(options).name() == PromptTemplate::yes_no_maybe_default().name() {
        &s.yes_no_maybe
    } else {
        &s.mcq
    };
    let top_k = req.top_k.unwrap_or(engine.top_k());
    let _guard = match &s.gate {
        Some(m) => Some(m.lock().await),
        None => None,
    };
    match engine.ask_with_top_k(&req.question, options, top_k).await {
        Ok(answer) => Json(answer).into_response(),
        Err(e) => {
            log::warn!("ask failed: {e}");
            rag_error(e)
        }
    }
}

async fn session_energy(State(s): State<Arc<AppState>>) -> Response {
    Json(s.monitor.session_report()).into_response()
}

async fn config(State(s): State<Arc<AppState>>) -> Response {
    Json(s.config.clone()).into_response()
}

async fn health(State(s): State<Arc<AppState>>) -> Response {
    let mut providers_ok = true;
    for url in &s.provider_urls {
        let ok = match s.http.get(url).send().await {
            Ok(r) => !r.status().is_server_error(),
            Err(_) => false,
        };
        providers_ok &= ok;
    }
    Json(json!({
        "status": if providers_ok { "ok" } else { "degraded" },
        "api_version": API_VERSION,
        "index_entries": s.mcq.index().len(),
        "providers_ok": providers_ok,
    }))
    .into_response()
}

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/ask", post(ask))
        .route("/api/session/energy", get(session_energy))
        .route("/api/config", get(config))
        .route("/api/health", get(health))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_PAGE) })),
    }
}

/// Resolve the listen address, refusing non-loopback hosts unless allowed.
pub fn bind_addr(cfg: &AppConfig) -> Result<SocketAddr, CliError> {
    let host = if cfg.server.bind == "localhost" { "127.0.0.1" } else { cfg.server.bind.as_str() };
    let ip: IpAddr = host
        .parse()
        .map_err(|e| CliError::input(format!("bind address {:?}: {e}", cfg.server.bind)))?;
    if !ip.is_loopback() && !cfg.server.allow_non_loopback {
        return Err(CliError::input(format!(
            "refusing to bind non-loopback address {ip} without --allow-non-loopback"
        )));
    }
    Ok(SocketAddr::new(ip, cfg.server.port))
}

pub async fn serve(cfg: &AppConfig) -> Result<(), CliError> {
    let addr = bind_addr(cfg)?;
    let state = AppState::new(cfg)?;
    let monitor = state.monitor().clone();
    let app = router(state, cfg.server.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::failure(format!("cannot bind {addr}: {e}")))?;
    eprintln!("listening on http://{}", listener.local_addr().map_err(CliError::failure)?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(CliError::failure)?;
    monitor.stop();
    Ok(())
}
