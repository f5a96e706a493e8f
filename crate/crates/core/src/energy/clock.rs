use std::fmt::Debug;
use std::time::Instant;

use parking_lot::Mutex;

/// Monotonic milliseconds since an arbitrary origin.
pub trait Clock: Send + Sync + Debug {
    fn now_ms(&self) -> f64;
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> f64 {
        self.origin.elapsed().as_secs_f64() * 1000.0
    }
}

/// A simulated clock for reproducible runs. Time moves only through
/// [`VirtualClock::advance`] and, if `step_ms > 0`, by `step_ms` after each
/// read.
#[derive(Debug)]
pub struct VirtualClock {
    now: Mutex<f64>,
    step_ms: f64,
}

impl VirtualClock {
    pub fn new(step_ms: f64) -> Self {
        Self {
            now: Mutex::new(0.0),
            step_ms,
        }
    }

    pub fn advance(&self, ms: f64) {
        *self.now.lock() += ms;
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> f64 {
        let mut now = self.now.lock();
        let t = *now;
        *now += self.step_ms;
        t
    }
}
