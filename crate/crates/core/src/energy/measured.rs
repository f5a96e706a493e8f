//! Readers for the `measured` backend: Linux powercap counters for CPU
//! packages and a polled command for GPU power.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::counter::{read_cpu_energy_delta, PlausibilityBound};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuPowerCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl Default for GpuPowerCommand {
    fn default() -> Self {
        Self {
            program: "nvidia-smi".into(),
            args: vec![
                "--query-gpu=power.draw".into(),
                "--format=csv,noheader,nounits".into(),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasuredConfig {
    pub powercap_root: PathBuf,
    /// Explicit zone directories; when empty, top-level `intel-rapl:N`
    /// packages under `powercap_root` are used.
    pub zones: Vec<PathBuf>,
    /// `None` disables GPU polling.
    pub gpu_command: Option<GpuPowerCommand>,
    pub plausibility_j_per_tick: f64,
}

impl Default for MeasuredConfig {
    fn default() -> Self {
        Self {
            powercap_root: PathBuf::from("/sys/class/powercap"),
            zones: Vec::new(),
            gpu_command: Some(GpuPowerCommand::default()),
            plausibility_j_per_tick: PlausibilityBound::default().joules_per_tick,
        }
    }
}

/// One cumulative energy counter (`energy_uj`) with its wrap range.
#[derive(Debug, Clone)]
pub struct RaplZone {
    pub dir: PathBuf,
    pub max_range_uj: u64,
    last_uj: u64,
    last_t_ms: f64,
}

fn read_u64(path: &Path) -> std::io::Result<u64> {
    std::fs::read_to_string(path)?
        .trim()
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

impl RaplZone {
    pub fn open(dir: &Path, t_ms: f64) -> std::io::Result<Self> {
        let max_range_uj = read_u64(&dir.join("max_energy_range_uj"))?;
        let last_uj = read_u64(&dir.join("energy_uj"))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            max_range_uj,
            last_uj,
            last_t_ms: t_ms,
        })
    }

    /// Joules since the previous reading; implausible deltas count as zero.
    pub fn poll(&mut self, t_ms: f64, bound: &PlausibilityBound) -> std::io::Result<f64> {
        let curr = read_u64(&self.dir.join("energy_uj"))?;
        let elapsed = t_ms - self.last_t_ms;
        let joules = match read_cpu_energy_delta(self.last_uj, curr, self.max_range_uj, elapsed, bound) {
            Ok(j) => j,
            Err(e) => {
                log::warn!("{}: discarding sample: {e}", self.dir.display());
                0.0
            }
        };
        self.last_uj = curr;
        self.last_t_ms = t_ms;
        Ok(joules)
    }
}

/// Top-level package zones (`intel-rapl:0`, `intel-rapl:1`, ...). Subzones
/// (`intel-rapl:0:0`) are excluded because packages already include them.
pub(crate) fn discover_zones(root: &Path) -> Vec<PathBuf> {
    let Ok(read) = std::fs::read_dir(root) else {
        return Vec::new();
    };
    let mut zones: Vec<PathBuf> = read
        .filter_map(Result::ok)
        .filter(|e| {
            let name = e.file_name();
            let name = name.to_string_lossy();
            name.split(':').count() == 2 && name.contains("rapl")
        })
        .map(|e| e.path())
        .filter(|p| p.join("energy_uj").exists())
        .collect();
    zones.sort();
    zones
}

/// Sum of the per-line watt readings printed by the GPU power command.
pub(crate) fn parse_gpu_watts(stdout: &str) -> Option<f64> {
    let mut total = 0.0;
    let mut any = false;
    for line in stdout.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let w: f64 = line.split_whitespace().next()?.parse().ok()?;
        total += w;
        any = true;
    }
    any.then_some(total)
}

pub(crate) fn poll_gpu(cmd: &GpuPowerCommand) -> Option<f64> {
    let out = Command::new(&cmd.program).args(&cmd.args).output().ok()?;
    if !out.status.success() {
        return None;
    }
    parse_gpu_watts(&String::from_utf8_lossy(&out.stdout))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gpu_output_parsing() {
        assert_eq!(parse_gpu_watts("35.12\n"), Some(35.12));
        assert_eq!(parse_gpu_watts("10.0\n20.5\n"), Some(30.5));
        assert_eq!(parse_gpu_watts("[N/A]\n"), None);
        assert_eq!(parse_gpu_watts(""), None);
    }

    #[test]
    fn zone_discovery_and_polling() {
        let root = tempfile::tempdir().unwrap();
        for name in ["intel-rapl:0", "intel-rapl:0:0", "intel-rapl:1"] {
            let d = root.path().join(name);
            std::fs::create_dir(&d).unwrap();
            std::fs::write(d.join("energy_uj"), "1000000\n").unwrap();
            std::fs::write(d.join("max_energy_range_uj"), "262143328850\n").unwrap();
        }
        let zones = discover_zones(root.path());
        let names: Vec<_> = zones.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["intel-rapl:0", "intel-rapl:1"]);

        let mut z = RaplZone::open(&zones[0], 0.0).unwrap();
        std::fs::write(zones[0].join("energy_uj"), "3500000\n").unwrap();
        let j = z.poll(100.0, &PlausibilityBound::default()).unwrap();
        assert!((j - 2.5).abs() < 1e-12);
    }

    #[test]
    fn missing_root_has_no_zones() {
        assert!(discover_zones(Path::new("/nonexistent/powercap")).is_empty());
    }
}
