use std::sync::Arc;
use std::time::Duration;

use ecorag_core::energy::{
    integrate_gpu_energy, Clock, EnergyMonitor, EnergySource, MonitorBackend, PowerSample, PowerTrace, TracePoint,
    VirtualClock, JOULES_PER_KWH,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_trace(rng: &mut StdRng) -> PowerTrace {
    let n = rng.random_range(1..12);
    let mut t = rng.random_range(0.0..5.0);
    let points = (0..n)
        .map(|_| {
            let p = TracePoint {
                t_s: t,
                cpu_w: rng.random_range(0.0..150.0),
                gpu_w: rng.random_range(0.0..350.0),
            };
            t += rng.random_range(0.1..60.0);
            p
        })
        .collect();
    PowerTrace::new(points).unwrap()
}

/// Power at `t` seconds: linear between points, flat outside.
fn power_at(points: &[(f64, f64)], t: f64) -> f64 {
    if t <= points[0].0 {
        return points[0].1;
    }
    for w in points.windows(2) {
        if t <= w[1].0 {
            let f = (t - w[0].0) / (w[1].0 - w[0].0);
            return w[0].1 + f * (w[1].1 - w[0].1);
        }
    }
    points[points.len() - 1].1
}

/// Joules over [a, b] seconds: Simpson's rule on each linear piece.
fn analytic_joules(points: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let mut cuts = vec![a];
    cuts.extend(points.iter().map(|p| p.0).filter(|&t| t > a && t < b));
    cuts.push(b);
    cuts.windows(2)
        .map(|w| {
            let (l, r) = (w[0], w[1]);
            (r - l) / 6.0 * (power_at(points, l) + 4.0 * power_at(points, (l + r) / 2.0) + power_at(points, r))
        })
        .sum()
}

fn synthetic(trace: PowerTrace) -> (EnergyMonitor, Arc<VirtualClock>) {
    let clock = Arc::new(VirtualClock::new(0.0));
    let dyn_clock: Arc<dyn Clock> = clock.clone();
    let m = EnergyMonitor::start(MonitorBackend::Synthetic(trace), dyn_clock, "GR", 430.0, Duration::from_millis(100));
    (m, clock)
}

fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

#[test]
fn scripted_traces_match_analytic_integral() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..20 {
        let trace = random_trace(&mut rng);
        let end = trace.points.last().unwrap().t_s;
        let a = rng.random_range(0.0..end + 10.0);
        let b = a + rng.random_range(1.0..end + 30.0);
        let (m, clock) = synthetic(trace.clone());
        clock.advance(a * 1000.0);
        let from = m.mark();
        clock.advance((b - a) * 1000.0);
        let to = m.mark();
        let r = m.energy_between(from, to);

        let cpu: Vec<(f64, f64)> = trace.points.iter().map(|p| (p.t_s, p.cpu_w)).collect();
        let gpu: Vec<(f64, f64)> = trace.points.iter().map(|p| (p.t_s, p.gpu_w)).collect();
        let want_cpu = analytic_joules(&cpu, a, b) / JOULES_PER_KWH;
        let want_gpu = analytic_joules(&gpu, a, b) / JOULES_PER_KWH;
        assert!(rel_err(r.cpu_kwh, want_cpu) < 1e-9, "{} vs {want_cpu}", r.cpu_kwh);
        assert!(rel_err(r.gpu_kwh, want_gpu) < 1e-9, "{} vs {want_gpu}", r.gpu_kwh);
        assert_eq!(r.source, EnergySource::Synthetic);
    }
}

#[test]
fn constant_100_w_for_an_hour() {
    let (m, clock) = synthetic(PowerTrace::constant(0.0, 100.0));
    let from = m.mark();
    clock.advance(3_600_000.0);
    let r = m.energy_between(from, m.mark());
    assert_eq!(r.gpu_kwh, 0.1);
    assert_eq!(r.total_kwh, 0.1);

    let samples: Vec<PowerSample> = [0.0, 1_800_000.0, 3_600_000.0]
        .iter()
        .map(|&t| PowerSample {
            t_ms: t,
            gpu_power_w: Some(100.0),
            cpu_energy_j: 0.0,
        })
        .collect();
    assert_eq!(integrate_gpu_energy(&samples).unwrap().kwh, 0.1);
}

#[test]
fn polled_samples_at_vertices_are_exact() {
    let mut rng = StdRng::seed_from_u64(12);
    for _ in 0..20 {
        let trace = random_trace(&mut rng);
        let samples: Vec<PowerSample> = trace
            .points
            .iter()
            .map(|p| PowerSample {
                t_ms: p.t_s * 1000.0,
                gpu_power_w: Some(p.gpu_w),
                cpu_energy_j: 0.0,
            })
            .collect();
        let gpu: Vec<(f64, f64)> = trace.points.iter().map(|p| (p.t_s, p.gpu_w)).collect();
        let (a, b) = (gpu[0].0, gpu[gpu.len() - 1].0);
        let got = integrate_gpu_energy(&samples).unwrap().kwh;
        assert!(rel_err(got, analytic_joules(&gpu, a, b) / JOULES_PER_KWH) < 1e-9);
    }
}

proptest! {
    #[test]
    fn windows_are_additive_and_session_is_a_superset(cuts in prop::collection::vec(0.0f64..5000.0, 1..8), seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (m, clock) = synthetic(random_trace(&mut rng));
        let mut marks = vec![m.mark()];
        for c in &cuts {
            clock.advance(*c);
            marks.push(m.mark());
        }
        let parts: f64 = marks.windows(2).map(|w| m.energy_between(w[0], w[1]).total_kwh).sum();
        let whole = m.energy_between(marks[0], *marks.last().unwrap()).total_kwh;
        prop_assert!((parts - whole).abs() <= 1e-12 * whole.max(1e-12));
        prop_assert!(m.session_report().total_kwh >= whole - 1e-15);
        for w in marks.windows(2) {
            let r = m.energy_between(w[0], w[1]);
            prop_assert!(r.cpu_kwh >= 0.0 && r.gpu_kwh >= 0.0);
            prop_assert_eq!(r.total_kwh, r.cpu_kwh + r.gpu_kwh);
            prop_assert!((r.co2_g - r.total_kwh * 430.0).abs() < 1e-12);
        }
    }
}
