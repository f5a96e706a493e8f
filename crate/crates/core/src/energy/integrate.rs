use serde::{Deserialize, Serialize};

use super::{EnergyError, JOULES_PER_KWH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub t_ms: f64,
    pub gpu_power_w: Option<f64>,
    /// Cumulative CPU energy since the monitor started, wrap-corrected.
    pub cpu_energy_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpuIntegration {
    pub kwh: f64,
    /// Fewer than two samples carried a GPU reading; `kwh` is 0.
    pub insufficient_samples: bool,
}

/// Trapezoid rule over `(t_ms, watts)` points; returns joules.
pub fn trapezoid_joules(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) / 1000.0 * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Integrate polled GPU power into kWh. Samples without a GPU reading are
/// ignored; timestamps must strictly increase.
pub fn integrate_gpu_energy(samples: &[PowerSample]) -> Result<GpuIntegration, EnergyError> {
    for (i, w) in samples.windows(2).enumerate() {
        if w[1].t_ms <= w[0].t_ms {
            return Err(EnergyError::NonMonotonic(i + 1));
        }
    }
    let points: Vec<(f64, f64)> = samples
        .iter()
        .filter_map(|s| s.gpu_power_w.map(|p| (s.t_ms, p)))
        .collect();
    if points.len() < 2 {
        return Ok(GpuIntegration {
            kwh: 0.0,
            insufficient_samples: true,
        });
    }
    Ok(GpuIntegration {
        kwh: trapezoid_joules(&points) / JOULES_PER_KWH,
        insufficient_samples: false,
    })
}

/// Linear interpolation of a piecewise-linear series, holding the end values
/// outside its range. `points` must be sorted by time and non-empty.
pub(crate) fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= t);
    let (a, b) = (points[i - 1], points[i]);
    a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
}

/// Energy in joules of a piecewise-linear power series over `[t0, t1]`.
/// Exact for piecewise-linear power because every breakpoint inside the
/// window is kept.
pub fn window_joules(points: &[(f64, f64)], t0: f64, t1: f64) -> f64 {
    if points.is_empty() || t1 <= t0 {
        return 0.0;
    }
    let mut pts = Vec::with_capacity(points.len() + 2);
    pts.push((t0, interpolate(points, t0)));
    pts.extend(points.iter().copied().filter(|p| p.0 > t0 && p.0 < t1));
    pts.push((t1, interpolate(points, t1)));
    trapezoid_joules(&pts)
}
