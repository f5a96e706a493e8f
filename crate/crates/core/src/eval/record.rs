use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetKind, EvalError};
use crate::energy::{EnergyReport, EnergySource};
use crate::rag::Attribution;

pub const RUN_SCHEMA_VERSION: u32 = 1;

/// Settings a run was produced with, recorded for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfigSnapshot {
    pub top_k: usize,
    pub template: String,
    pub seed: u64,
    pub region: String,
    pub embedder_url: String,
    pub embedder_model: String,
    pub generator_url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_kind: Option<DatasetKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_path: Option<String>,
    pub n: usize,
    pub energy_backend: EnergySource,
    pub attribution: Attribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub id: String,
    pub gold: String,
    pub predicted: Option<String>,
    pub correct: bool,
    pub latency_ms: f64,
    pub energy_wh: f64,
    #[serde(default)]
    pub errored: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One benchmark run: per-item outcomes in presentation order plus energy
/// totals for the whole run window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub model_name: String,
    /// Wall-clock creation time (RFC 3339). The only field that differs
    /// between reruns of the same configuration.
    pub created_at: String,
    pub config: RunConfigSnapshot,
    pub items: Vec<ItemOutcome>,
    pub totals: EnergyReport,
    pub unparsed_count: usize,
    #[serde(default)]
    pub errored_count: usize,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.id.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let run: Self = serde_json::from_str(text).map_err(|e| EvalError::Format {
            path: "<run record>".into(),
            reason: e.to_string(),
        })?;
        run.validate()?;
        Ok(run)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            EvalError::Format { reason, .. } => EvalError::Format {
                path: path.display().to_string(),
                reason,
            },
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| EvalError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |reason: String| EvalError::Format {
            path: "<run record>".into(),
            reason,
        };
        if self.schema_version != RUN_SCHEMA_VERSION {
            return Err(bad(format!(
                "schema version {} (expected {RUN_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.items.is_empty() {
            return Err(bad("run has no items".into()));
        }
        for it in &self.items {
            let expect = it.predicted.as_deref() == Some(it.gold.as_str());
            if it.correct != expect {
                return Err(bad(format!("item {}: correct flag disagrees with prediction", it.id)));
            }
        }
        if self.wall_time_s.is_nan() || self.wall_time_s < 0.0 {
            return Err(bad("wall_time_s must be non-negative".into()));
        }
        Ok(())
    }
}
