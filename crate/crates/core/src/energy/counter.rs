use super::EnergyError;

/// Upper bound on a plausible counter increase, expressed per sampling tick
/// and scaled linearly with the elapsed time between readings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlausibilityBound {
    pub joules_per_tick: f64,
    pub tick_ms: f64,
}

impl Default for PlausibilityBound {
    fn default() -> Self {
        Self {
            joules_per_tick: 10_000.0,
            tick_ms: 100.0,
        }
    }
}

impl PlausibilityBound {
    pub fn limit_j(&self, elapsed_ms: f64) -> f64 {
        self.joules_per_tick * (elapsed_ms / self.tick_ms).max(1.0)
    }
}

/// Counter increase in µJ, assuming at most one wraparound at
/// `max_range_uj`. Always within `[0, max_range_uj]` for in-range inputs.
pub fn wrap_delta_uj(prev_uj: u64, curr_uj: u64, max_range_uj: u64) -> u64 {
    if curr_uj >= prev_uj {
        curr_uj - prev_uj
    } else {
        curr_uj + (max_range_uj - prev_uj)
    }
}

/// Joules consumed between two readings of a cumulative µJ counter.
/// Deltas above the plausibility bound are rejected.
pub fn read_cpu_energy_delta(
    prev_uj: u64,
    curr_uj: u64,
    max_range_uj: u64,
    elapsed_ms: f64,
    bound: &PlausibilityBound,
) -> Result<f64, EnergyError> {
    let delta_j = wrap_delta_uj(prev_uj, curr_uj, max_range_uj) as f64 / 1e6;
    let bound_j = bound.limit_j(elapsed_ms);
    if delta_j > bound_j {
        return Err(EnergyError::Implausible {
            delta_j,
            elapsed_ms,
            bound_j,
        });
    }
    Ok(delta_j)
}
