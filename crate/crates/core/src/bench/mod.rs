//! Workload generators, timing harness and result files.

mod poisson;
mod rsnn;
mod sweep;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::queue::QueueKind;

pub use poisson::{
    default_capacity, gen_poisson, measure_drop_rate, run_inference_bench, run_inference_suite, DropMeasurement,
    PoissonStream, PoissonWorkload,
};
pub use rsnn::{rsnn_params_for, run_rsnn_bench, run_rsnn_suite, RsnnMode, HOMOGENEOUS_DELAY_STEPS};
pub use sweep::{sweep, SweepAxis, SweepBase};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 42;

/// Spike count below which a drop-rate estimate is flagged.
pub const MIN_CONFIDENT_SPIKES: u64 = 1000;

/// Repetition settings for timed runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub reps: u32,
    pub warmup: u32,
}

impl Default for Timing {
    fn default() -> Self {
        Timing { reps: 5, warmup: 2 }
    }
}

impl Timing {
    pub(crate) fn check(&self) -> Result<()> {
        if self.reps < 3 || self.warmup < 1 {
            return Err(crate::Error::Config(format!(
                "timing needs at least 3 reps and 1 warmup, got {} and {}",
                self.reps, self.warmup
            )));
        }
        Ok(())
    }
}

/// One result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub workload: String,
    pub kind: QueueKind,
    pub capacity: usize,
    pub max_delay: u64,
    pub batch: usize,
    pub lambda: f64,
    pub delay: u64,
    pub steps: u64,
    pub reps: u32,
    /// Median wall time; absent for rows that only count drops.
    pub ns_per_step_per_queue: Option<f64>,
    pub drop_rate: f64,
    pub spikes_in: u64,
    pub spikes_out: u64,
    pub seed: u64,
    pub platform: String,
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, records)?;
    Ok(())
}

/// Write `records` as CSV, or JSON when the path ends in `.json`.
pub fn write_records(records: &[BenchRecord], path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => write_json(records, file),
        _ => write_csv(records, file),
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Hostname and CPU model, for labelling rows.
pub fn platform_label() -> String {
    let host = std::fs::read_to_string("/etc/hostname")
        .ok()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .or_else(|| std::env::var("HOSTNAME").ok())
        .unwrap_or_else(|| "unknown-host".into());
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|info| {
            info.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|s| s.trim().to_string())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_string());
    format!("{host} ({cpu})")
}

pub(crate) fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
