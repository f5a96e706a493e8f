use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EnergyError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t_s: f64,
    #[serde(default)]
    pub cpu_w: f64,
    #[serde(default)]
    pub gpu_w: f64,
}

/// A scripted piecewise-linear power trace. Power is interpolated linearly
/// between points and held constant outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTrace {
    pub points: Vec<TracePoint>,
}

impl PowerTrace {
    pub fn new(points: Vec<TracePoint>) -> Result<Self, EnergyError> {
        let trace = Self { points };
        trace.validate()?;
        Ok(trace)
    }

    pub fn constant(cpu_w: f64, gpu_w: f64) -> Self {
        Self {
            points: vec![TracePoint { t_s: 0.0, cpu_w, gpu_w }],
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, EnergyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EnergyError::InvalidTrace(format!("{}: {e}", path.display())))?;
        let trace: Self = serde_json::from_str(&text)
            .map_err(|e| EnergyError::InvalidTrace(format!("{}: {e}", path.display())))?;
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if self.points.is_empty() {
            return Err(EnergyError::InvalidTrace("trace has no points".into()));
        }
        for w in self.points.windows(2) {
            if w[1].t_s <= w[0].t_s {
                return Err(EnergyError::InvalidTrace("trace times must strictly increase".into()));
            }
        }
        for p in &self.points {
            if !(p.t_s.is_finite() && p.cpu_w >= 0.0 && p.gpu_w >= 0.0 && p.cpu_w.is_finite() && p.gpu_w.is_finite()) {
                return Err(EnergyError::InvalidTrace(format!("invalid point {p:?}")));
            }
        }
        Ok(())
    }

    pub(crate) fn cpu_series_ms(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.t_s * 1000.0, p.cpu_w)).collect()
    }

    pub(crate) fn gpu_series_ms(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.t_s * 1000.0, p.gpu_w)).collect()
    }
}
