//! Application configuration: one TOML (or JSON) file plus `ECORAG_*`
//! environment overrides. Every field has a default, so an empty file is a
//! valid configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use ecorag_core::energy::{
    CarbonIntensityTable, Clock, EnergyMonitor, MeasuredConfig, MonitorBackend, PowerTrace, SystemClock,
    VirtualClock, DEFAULT_REMOTE_WH_PER_PROMPT, DEFAULT_SAMPLE_INTERVAL_MS,
};
use ecorag_core::index::DEFAULT_TOP_K;
use ecorag_core::{ChunkConfig, ProviderConfig};
use serde::{Deserialize, Deserializer, Serialize};

use crate::CliError;

pub const CONFIG_ENV: &str = "ECORAG_CONFIG";
pub const DEFAULT_OLLAMA_URL: &str = "http://127.0.0.1:11434";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Measured,
    Synthetic,
    EstimatedRemote,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "measured" => Ok(Self::Measured),
            "synthetic" => Ok(Self::Synthetic),
            "estimated-remote" => Ok(Self::EstimatedRemote),
            other => Err(format!(
                "unknown energy backend {other:?} (expected measured, synthetic or estimated-remote)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    #[default]
    System,
    /// Simulated time advancing `virtual_step_ms` per read; makes latencies
    /// and synthetic energies reproducible.
    Virtual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConfig {
    pub backend: BackendKind,
    /// Power trace (JSON `{points: [{t_s, cpu_w, gpu_w}]}`) for the synthetic
    /// backend. Without one a constant 100 W GPU draw is assumed.
    pub trace_path: Option<PathBuf>,
    pub remote_wh_per_prompt: f64,
    pub sample_interval_ms: u64,
    pub measured: MeasuredConfig,
    pub clock: ClockKind,
    pub virtual_step_ms: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Measured,
            trace_path: None,
            remote_wh_per_prompt: DEFAULT_REMOTE_WH_PER_PROMPT,
            sample_interval_ms: DEFAULT_SAMPLE_INTERVAL_MS,
            measured: MeasuredConfig::default(),
            clock: ClockKind::System,
            virtual_step_ms: 250.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    /// Binding anything but loopback is refused unless this is set.
    pub allow_non_loopback: bool,
    /// Let /api/ask calls overlap. Answers then carry session-level
    /// attribution only.
    pub concurrent: bool,
    /// Directory of web UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            allow_non_loopback: false,
            concurrent: false,
            static_dir: None,
        }
    }
}

/// A provider table in a config file; absent keys keep the role's default.
#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct ProviderFields {
    base_url: Option<String>,
    model_name: Option<String>,
    timeout_ms: Option<u64>,
    max_retries: Option<u32>,
    retry_base_ms: Option<u64>,
    path: Option<String>,
    request_text_field: Option<String>,
    response_field: Option<String>,
    token_count_field: Option<String>,
}

impl ProviderFields {
    fn over(self, mut p: ProviderConfig) -> ProviderConfig {
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { p.$f = v; })* };
        }
        take!(base_url, model_name, timeout_ms, max_retries, retry_base_ms, path, request_text_field, response_field);
        if self.token_count_field.is_some() {
            p.token_count_field = self.token_count_field;
        }
        p
    }
}

fn embedder_fields<'de, D: Deserializer<'de>>(d: D) -> Result<ProviderConfig, D::Error> {
    Ok(ProviderFields::deserialize(d)?.over(ProviderConfig::embedder(DEFAULT_OLLAMA_URL)))
}

fn generator_fields<'de, D: Deserializer<'de>>(d: D) -> Result<ProviderConfig, D::Error> {
    Ok(ProviderFields::deserialize(d)?.over(ProviderConfig::generator(DEFAULT_OLLAMA_URL)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    #[serde(deserialize_with = "embedder_fields")]
    pub embedder: ProviderConfig,
    #[serde(deserialize_with = "generator_fields")]
    pub generator: ProviderConfig,
    pub index_path: PathBuf,
    pub prompt_template_path: Option<PathBuf>,
    pub top_k: usize,
    pub region: String,
    /// Extra or overriding region intensities (gCO2/kWh).
    pub carbon_intensity: BTreeMap<String, f64>,
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    pub corpus_extensions: Vec<String>,
    pub embed_parallelism: usize,
    pub energy: EnergyConfig,
    pub server: ServerConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        let chunk = ChunkConfig::default();
        Self {
            embedder: ProviderConfig::embedder(DEFAULT_OLLAMA_URL),
            generator: ProviderConfig::generator(DEFAULT_OLLAMA_URL),
            index_path: PathBuf::from("ecorag.index"),
            prompt_template_path: None,
            top_k: DEFAULT_TOP_K,
            region: "GR".into(),
            carbon_intensity: BTreeMap::new(),
            chunk_size: chunk.chunk_size,
            chunk_overlap: chunk.overlap,
            corpus_extensions: vec!["txt".into(), "md".into()],
            embed_parallelism: 4,
            energy: EnergyConfig::default(),
            server: ServerConfig::default(),
        }
    }
}

fn parse_env<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| CliError::input(format!("environment variable {key}={raw:?}: {e}")))
}

impl AppConfig {
    /// Read `path` (TOML unless the extension is `.json`).
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        cfg.map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
    }

    /// Resolve the file from `explicit` or `$ECORAG_CONFIG` (defaults when
    /// neither is set), then apply environment overrides.
    pub fn load(explicit: Option<&Path>) -> Result<Self, CliError> {
        let vars: BTreeMap<String, String> = std::env::vars().filter(|(k, _)| k.starts_with("ECORAG_")).collect();
        let from_env = vars.get(CONFIG_ENV).map(PathBuf::from);
        let mut cfg = match explicit.map(Path::to_path_buf).or(from_env) {
            Some(p) => Self::from_file(&p)?,
            None => Self::default(),
        };
        cfg.apply_overrides(&vars)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply `ECORAG_*` overrides from `vars`.
    pub fn apply_overrides(&mut self, vars: &BTreeMap<String, String>) -> Result<(), CliError> {
        for (key, val) in vars {
            match key.as_str() {
                "ECORAG_EMBEDDER_URL" => self.embedder.base_url = val.clone(),
                "ECORAG_EMBEDDER_MODEL" => self.embedder.model_name = val.clone(),
                "ECORAG_GENERATOR_URL" => self.generator.base_url = val.clone(),
                "ECORAG_GENERATOR_MODEL" => self.generator.model_name = val.clone(),
                "ECORAG_INDEX_PATH" => self.index_path = PathBuf::from(val),
                "ECORAG_PROMPT_TEMPLATE" => self.prompt_template_path = Some(PathBuf::from(val)),
                "ECORAG_TOP_K" => self.top_k = parse_env(key, val)?,
                "ECORAG_REGION" => self.region = val.clone(),
                "ECORAG_ENERGY_BACKEND" => self.energy.backend = parse_env(key, val)?,
                "ECORAG_TRACE_PATH" => self.energy.trace_path = Some(PathBuf::from(val)),
                "ECORAG_BIND" => self.server.bind = val.clone(),
                "ECORAG_PORT" => self.server.port = parse_env(key, val)?,
                CONFIG_ENV => {}
                other => log::warn!("ignoring unknown environment variable {other}"),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.top_k == 0 {
            return Err(CliError::input("top_k must be at least 1"));
        }
        self.chunk_config()?;
        self.carbon_table()?.intensity(&self.region).map_err(CliError::input)?;
        self.embedder.endpoint().map_err(CliError::input)?;
        self.generator.endpoint().map_err(CliError::input)?;
        Ok(())
    }

    pub fn chunk_config(&self) -> Result<ChunkConfig, CliError> {
        ChunkConfig::new(self.chunk_size, self.chunk_overlap).map_err(CliError::input)
    }

    pub fn carbon_table(&self) -> Result<CarbonIntensityTable, CliError> {
        let mut t = CarbonIntensityTable::default();
        for (region, v) in &self.carbon_intensity {
            t.set(region, *v).map_err(CliError::input)?;
        }
        Ok(t)
    }

    pub fn intensity(&self) -> Result<f64, CliError> {
        self.carbon_table()?.intensity(&self.region).map_err(CliError::input)
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        match self.energy.clock {
            ClockKind::System => Arc::new(SystemClock::new()),
            ClockKind::Virtual => Arc::new(VirtualClock::new(self.energy.virtual_step_ms)),
        }
    }

    pub fn monitor_backend(&self) -> Result<MonitorBackend, CliError> {
        Ok(match self.energy.backend {
            BackendKind::Measured => MonitorBackend::Measured(self.energy.measured.clone()),
            BackendKind::Synthetic => MonitorBackend::Synthetic(match &self.energy.trace_path {
                Some(p) => PowerTrace::from_json_file(p).map_err(CliError::input)?,
                None => PowerTrace::constant(0.0, 100.0),
            }),
            BackendKind::EstimatedRemote => MonitorBackend::EstimatedRemote {
                wh_per_prompt: self.energy.remote_wh_per_prompt,
            },
        })
    }

    pub fn start_monitor(&self) -> Result<Arc<EnergyMonitor>, CliError> {
        Ok(Arc::new(EnergyMonitor::start(
            self.monitor_backend()?,
            self.clock(),
            &self.region,
            self.intensity()?,
            Duration::from_millis(self.energy.sample_interval_ms.max(1)),
        )))
    }

    /// The configuration as served to clients. Provider URLs are kept but
    /// stripped of any credentials or query strings.
    pub fn sanitized(&self) -> serde_json::Value {
        let clean = |u: &str| match reqwest::Url::parse(u) {
            Ok(mut url) => {
                let _ = url.set_username("");
                let _ = url.set_password(None);
                url.set_query(None);
                url.to_string()
            }
            Err(_) => String::new(),
        };
        serde_json::json!({
            "api_version": crate::server::API_VERSION,
            "embedder": { "base_url": clean(&self.embedder.base_url), "model_name": self.embedder.model_name },
            "generator": { "base_url": clean(&self.generator.base_url), "model_name": self.generator.model_name },
            "top_k": self.top_k,
            "region": self.region,
            "energy_backend": self.energy.backend,
            "concurrent": self.server.concurrent,
        })
    }
}
