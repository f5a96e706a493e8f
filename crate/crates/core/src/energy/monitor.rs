use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use parking_lot::{Mutex, RwLock};

use super::counter::PlausibilityBound;
use super::integrate::{interpolate, window_joules, PowerSample};
use super::measured::{discover_zones, poll_gpu, GpuPowerCommand, MeasuredConfig, RaplZone};
use super::{estimate_remote_kwh, Clock, EnergyReport, EnergySource, PowerTrace, JOULES_PER_KWH};

#[derive(Debug, Clone, PartialEq)]
pub enum MonitorBackend {
    /// OS counters and GPU power polling.
    Measured(MeasuredConfig),
    /// Scripted power trace; time zero is the monitor start.
    Synthetic(PowerTrace),
    /// Fixed energy per generator call.
    EstimatedRemote { wh_per_prompt: f64 },
}

/// A point in the session: monitor time plus the number of generator calls
/// recorded so far. Energy is attributed between two marks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mark {
    pub t_ms: f64,
    pub prompts: u64,
}

struct MeasuredReaders {
    zones: Vec<RaplZone>,
    gpu: Option<GpuPowerCommand>,
    bound: PlausibilityBound,
    cpu_total_j: f64,
}

enum Kind {
    Measured {
        readers: Mutex<MeasuredReaders>,
        log: RwLock<Vec<PowerSample>>,
    },
    Synthetic {
        cpu: Vec<(f64, f64)>,
        gpu: Vec<(f64, f64)>,
    },
    Remote {
        wh_per_prompt: f64,
    },
}

struct Inner {
    clock: Arc<dyn Clock>,
    kind: Kind,
    prompts: AtomicU64,
    stop: AtomicBool,
}

impl Inner {
    /// Take one measured sample and return its timestamp. The readers lock
    /// is held across the append so the log stays time-ordered.
    fn sample(&self) -> f64 {
        let Kind::Measured { readers, log } = &self.kind else {
            return self.clock.now_ms();
        };
        let mut r = readers.lock();
        let t = self.clock.now_ms();
        let bound = r.bound;
        let mut joules = 0.0;
        for z in &mut r.zones {
            match z.poll(t, &bound) {
                Ok(j) => joules += j,
                Err(e) => log::warn!("{}: {e}", z.dir.display()),
            }
        }
        r.cpu_total_j += joules;
        let gpu_power_w = r.gpu.as_ref().and_then(poll_gpu);
        let sample = PowerSample {
            t_ms: t,
            gpu_power_w,
            cpu_energy_j: r.cpu_total_j,
        };
        let mut log = log.write();
        if log.last().is_none_or(|last| t > last.t_ms) {
            log.push(sample);
        }
        t
    }
}

/// Per-session energy monitor. With the `measured` backend a background
/// thread samples every `interval`; [`EnergyMonitor::mark`] also samples
/// synchronously so window boundaries always coincide with samples.
pub struct EnergyMonitor {
    inner: Arc<Inner>,
    sampler: Mutex<Option<JoinHandle<()>>>,
    region: String,
    intensity: f64,
    start: Mark,
}

impl std::fmt::Debug for EnergyMonitor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnergyMonitor")
            .field("source", &self.source())
            .field("region", &self.region)
            .field("intensity", &self.intensity)
            .finish()
    }
}

impl EnergyMonitor {
    pub fn start(
        backend: MonitorBackend,
        clock: Arc<dyn Clock>,
        region: &str,
        intensity: f64,
        interval: Duration,
    ) -> Self {
        let kind = match backend {
            MonitorBackend::Synthetic(trace) => Kind::Synthetic {
                cpu: trace.cpu_series_ms(),
                gpu: trace.gpu_series_ms(),
            },
            MonitorBackend::EstimatedRemote { wh_per_prompt } => Kind::Remote { wh_per_prompt },
            MonitorBackend::Measured(cfg) => {
                let t = clock.now_ms();
                let dirs = if cfg.zones.is_empty() {
                    discover_zones(&cfg.powercap_root)
                } else {
                    cfg.zones.clone()
                };
                let zones: Vec<RaplZone> = dirs
                    .iter()
                    .filter_map(|d| match RaplZone::open(d, t) {
                        Ok(z) => Some(z),
                        Err(e) => {
                            log::warn!("cannot read energy counter {}: {e}", d.display());
                            None
                        }
                    })
                    .collect();
                if zones.is_empty() {
                    log::warn!("no CPU energy counters available; CPU energy will read as zero");
                }
                let gpu = cfg.gpu_command.filter(|c| {
                    let ok = poll_gpu(c).is_some();
                    if !ok {
                        log::warn!("GPU power command {:?} unavailable; GPU energy will read as zero", c.program);
                    }
                    ok
                });
                Kind::Measured {
                    readers: Mutex::new(MeasuredReaders {
                        zones,
                        gpu,
                        bound: PlausibilityBound {
                            joules_per_tick: cfg.plausibility_j_per_tick,
                            tick_ms: interval.as_secs_f64() * 1000.0,
                        },
                        cpu_total_j: 0.0,
                    }),
                    log: RwLock::new(Vec::new()),
                }
            }
        };
        let inner = Arc::new(Inner {
            clock,
            kind,
            prompts: AtomicU64::new(0),
            stop: AtomicBool::new(false),
        });
        let start_t = inner.sample();
        let sampler = matches!(inner.kind, Kind::Measured { .. }).then(|| {
            let inner = Arc::clone(&inner);
            std::thread::spawn(move || {
                let tick = Duration::from_millis(10).min(interval);
                let mut waited = Duration::ZERO;
                while !inner.stop.load(Ordering::Relaxed) {
                    std::thread::sleep(tick);
                    waited += tick;
                    if waited >= interval {
                        waited = Duration::ZERO;
                        inner.sample();
                    }
                }
            })
        });
        Self {
            inner,
            sampler: Mutex::new(sampler),
            region: region.to_string(),
            intensity,
            start: Mark {
                t_ms: start_t,
                prompts: 0,
            },
        }
    }

    pub fn source(&self) -> EnergySource {
        match self.inner.kind {
            Kind::Measured { .. } => EnergySource::Measured,
            Kind::Synthetic { .. } => EnergySource::Synthetic,
            Kind::Remote { .. } => EnergySource::EstimatedRemote,
        }
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.inner.clock
    }

    pub fn session_start(&self) -> Mark {
        self.start
    }

    pub fn mark(&self) -> Mark {
        let t_ms = self.inner.sample();
        Mark {
            t_ms,
            prompts: self.inner.prompts.load(Ordering::SeqCst),
        }
    }

    /// Count one generator call (used by the remote estimate).
    pub fn record_prompt(&self) {
        self.inner.prompts.fetch_add(1, Ordering::SeqCst);
    }

    pub fn energy_between(&self, from: Mark, to: Mark) -> EnergyReport {
        let (cpu_j, gpu_j) = match &self.inner.kind {
            Kind::Synthetic { cpu, gpu } => {
                let (a, b) = (from.t_ms - self.start.t_ms, to.t_ms - self.start.t_ms);
                (window_joules(cpu, a, b), window_joules(gpu, a, b))
            }
            Kind::Measured { log, .. } => {
                let log = log.read();
                if log.is_empty() {
                    (0.0, 0.0)
                } else {
                    let cum: Vec<(f64, f64)> = log.iter().map(|s| (s.t_ms, s.cpu_energy_j)).collect();
                    let cpu_j = (interpolate(&cum, to.t_ms) - interpolate(&cum, from.t_ms)).max(0.0);
                    let gpu: Vec<(f64, f64)> = log
                        .iter()
                        .filter_map(|s| s.gpu_power_w.map(|w| (s.t_ms, w)))
                        .collect();
                    (cpu_j, window_joules(&gpu, from.t_ms, to.t_ms))
                }
            }
            Kind::Remote { wh_per_prompt } => {
                let n = to.prompts.saturating_sub(from.prompts);
                (0.0, estimate_remote_kwh(n, *wh_per_prompt) * JOULES_PER_KWH)
            }
        };
        EnergyReport::new(
            cpu_j / JOULES_PER_KWH,
            gpu_j / JOULES_PER_KWH,
            &self.region,
            self.intensity,
            self.source(),
        )
    }

    /// Energy from session start until now.
    pub fn session_report(&self) -> EnergyReport {
        self.energy_between(self.start, self.mark())
    }

    pub fn samples(&self) -> Vec<PowerSample> {
        match &self.inner.kind {
            Kind::Measured { log, .. } => log.read().clone(),
            _ => Vec::new(),
        }
    }

    /// Stop the background sampler and flush a final sample. Idempotent.
    pub fn stop(&self) {
        self.inner.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.sampler.lock().take() {
            let _ = h.join();
            self.inner.sample();
        }
    }
}

impl Drop for EnergyMonitor {
    fn drop(&mut self) {
        self.stop();
    }
}
