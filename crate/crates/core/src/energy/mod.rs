//! Energy measurement and the derived carbon and efficiency metrics.
//!
//! CPU energy comes from cumulative hardware counters (delta-based), GPU
//! energy from polled power integrated with the trapezoid rule. A monitor
//! attributes energy to wall-clock windows so each query and each session
//! gets its own figure.

mod carbon;
mod clock;
mod counter;
mod integrate;
mod measured;
mod monitor;
mod synthetic;

pub use carbon::CarbonIntensityTable;
pub use clock::{Clock, SystemClock, VirtualClock};
pub use counter::{read_cpu_energy_delta, wrap_delta_uj, PlausibilityBound};
pub use integrate::{integrate_gpu_energy, trapezoid_joules, window_joules, GpuIntegration, PowerSample};
pub use measured::{GpuPowerCommand, MeasuredConfig, RaplZone};
pub use monitor::{EnergyMonitor, Mark, MonitorBackend};
pub use synthetic::{PowerTrace, TracePoint};

use serde::{Deserialize, Serialize};

pub const JOULES_PER_KWH: f64 = 3.6e6;
pub const JOULES_PER_WH: f64 = 3600.0;
/// Per-prompt energy assumed for remote APIs.
pub const DEFAULT_REMOTE_WH_PER_PROMPT: f64 = 3.0;
pub const DEFAULT_SAMPLE_INTERVAL_MS: u64 = 100;

#[derive(Debug, Clone, thiserror::Error)]
pub enum EnergyError {
    #[error("unknown carbon-intensity region {0:?}")]
    UnknownRegion(String),
    #[error("carbon intensity must be positive, got {0}")]
    InvalidIntensity(f64),
    #[error("performance per kWh is undefined for zero energy")]
    UndefinedMetric,
    #[error("counter delta of {delta_j} J over {elapsed_ms} ms exceeds the plausibility bound of {bound_j} J")]
    Implausible { delta_j: f64, elapsed_ms: f64, bound_j: f64 },
    #[error("sample timestamps must strictly increase (at index {0})")]
    NonMonotonic(usize),
    #[error("invalid power trace: {0}")]
    InvalidTrace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergySource {
    Measured,
    Synthetic,
    EstimatedRemote,
}

/// Energy and emissions over some window. `total_kwh` is always
/// `cpu_kwh + gpu_kwh` and `co2_g` is always `total_kwh * intensity`.
/// Remote estimates carry their whole figure in `gpu_kwh`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub cpu_kwh: f64,
    pub gpu_kwh: f64,
    pub total_kwh: f64,
    pub co2_g: f64,
    pub region: String,
    pub intensity_g_per_kwh: f64,
    pub source: EnergySource,
}

impl EnergyReport {
    pub fn new(cpu_kwh: f64, gpu_kwh: f64, region: &str, intensity: f64, source: EnergySource) -> Self {
        let total_kwh = cpu_kwh + gpu_kwh;
        Self {
            cpu_kwh,
            gpu_kwh,
            total_kwh,
            co2_g: co2_grams(total_kwh, intensity),
            region: region.to_string(),
            intensity_g_per_kwh: intensity,
            source,
        }
    }

    pub fn total_wh(&self) -> f64 {
        self.total_kwh * 1000.0
    }
}

/// Grams of CO2 for `total_kwh` at `intensity` gCO2/kWh.
pub fn co2_grams(total_kwh: f64, intensity: f64) -> f64 {
    total_kwh * intensity
}

/// Accuracy points per kWh.
pub fn ppw(accuracy: f64, total_kwh: f64) -> Result<f64, EnergyError> {
    if total_kwh <= 0.0 || !total_kwh.is_finite() {
        return Err(EnergyError::UndefinedMetric);
    }
    Ok(accuracy / total_kwh)
}

/// Energy for `prompt_count` remote calls at a fixed per-prompt cost, in kWh.
pub fn estimate_remote_kwh(prompt_count: u64, wh_per_prompt: f64) -> f64 {
    prompt_count as f64 * wh_per_prompt / 1000.0
}

/// Energy to produce `token_count` tokens at a throughput given in tokens
/// per watt-second, in Wh.
pub fn tokens_to_wh(token_count: f64, tokens_per_watt_second: f64) -> f64 {
    token_count / tokens_per_watt_second / JOULES_PER_WH
}

/// Round half away from zero to two decimals, as reported in tables.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn co2_from_reported_totals() {
        assert!((co2_grams(1.1, 430.0) - 473.0).abs() < 1e-9);
        assert!((co2_grams(2.46, 430.0) - 1057.8).abs() < 1e-9);
        assert!((co2_grams(3.0, 650.0) - 1950.0).abs() < 1e-9);
        assert_eq!(co2_grams(0.0, 380.0), 0.0);
    }

    #[test]
    fn ppw_values() {
        assert_eq!(round2(ppw(0.585, 1.1).unwrap()), 0.53);
        assert_eq!(round2(ppw(0.475, 2.46).unwrap()), 0.19);
        assert_eq!(round2(ppw(0.57, 3.0).unwrap()), 0.19);
        assert_eq!(ppw(0.5, 1.0).unwrap(), 0.5);
        assert!(matches!(ppw(0.5, 0.0), Err(EnergyError::UndefinedMetric)));
    }

    #[test]
    fn ppw_halves_when_energy_doubles() {
        let a = ppw(0.7, 1.3).unwrap();
        let b = ppw(0.7, 2.6).unwrap();
        assert!((a / 2.0 - b).abs() < 1e-15);
    }

    #[test]
    fn remote_estimates() {
        assert_eq!(estimate_remote_kwh(1000, 3.0), 3.0);
        assert_eq!(estimate_remote_kwh(0, 3.0), 0.0);
        assert!((estimate_remote_kwh(200, 3.0) - 0.6).abs() < 1e-12);
        assert!((tokens_to_wh(900.0, 0.07) - 3.571).abs() < 1e-3);
        assert!((tokens_to_wh(0.07 * 3600.0, 0.07) - 1.0).abs() < 1e-12);
        assert!((tokens_to_wh(450.0, 0.07) - 1.786).abs() < 1e-3);
    }

    #[test]
    fn report_invariants() {
        let r = EnergyReport::new(1.0, 0.1, "GR", 430.0, EnergySource::Synthetic);
        assert_eq!(r.total_kwh, 1.0 + 0.1);
        assert_eq!(r.co2_g, r.total_kwh * 430.0);
    }
}
