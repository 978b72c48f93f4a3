use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    default_capacity, measure_drop_rate, platform_label, run_inference_suite, BenchRecord, PoissonWorkload, Timing,
};
use crate::error::{Error, Result};
use crate::queue::{make_queue, QueueConfig, QueueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Batch,
    Capacity,
    /// Delay over lambda; produces untimed drop-rate rows.
    Pressure,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Batch => "batch",
            SweepAxis::Capacity => "capacity",
            SweepAxis::Pressure => "pressure",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "batch" => Ok(SweepAxis::Batch),
            "capacity" => Ok(SweepAxis::Capacity),
            "pressure" => Ok(SweepAxis::Pressure),
            _ => Err(Error::Config(format!("unknown sweep axis `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBase {
    pub kinds: Vec<QueueKind>,
    pub workload: PoissonWorkload,
    /// Overrides the per-kind default capacity on the batch and pressure axes.
    pub capacity: Option<usize>,
    pub timing: Timing,
}

/// Build the config, or `None` when the kind cannot represent it.
fn config_for(kind: QueueKind, capacity: usize, max_delay: u64) -> Result<Option<QueueConfig>> {
    match make_queue(kind, capacity, max_delay) {
        Ok(_) => Ok(Some(QueueConfig::new(kind, capacity, max_delay))),
        Err(Error::Unsupported { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// One record per (grid point, kind). Kinds that cannot represent a grid
/// point (a ring shorter than the delay, a bit array past 32 steps) are skipped.
pub fn sweep(axis: SweepAxis, grid: &[f64], base: &SweepBase) -> Result<Vec<BenchRecord>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("sweep grid must be strictly ascending".into()));
    }
    if grid.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::Config("sweep grid values must be positive".into()));
    }
    base.workload.validate()?;
    let mut out = Vec::new();
    let mut timed = Vec::new();
    for &g in grid {
        for &kind in &base.kinds {
            let w = base.workload;
            let cap = |delay: u64| base.capacity.unwrap_or_else(|| default_capacity(kind, delay));
            match axis {
                SweepAxis::Batch => {
                    let w = PoissonWorkload { n_queues: g.round() as usize, ..w };
                    if let Some(cfg) = config_for(kind, cap(w.delay_steps), w.delay_steps)? {
                        timed.push((cfg, w));
                    }
                }
                SweepAxis::Capacity => {
                    if let Some(cfg) = config_for(kind, g.round() as usize, w.delay_steps)? {
                        timed.push((cfg, w));
                    }
                }
                SweepAxis::Pressure => {
                    let delay = ((g * w.lambda_steps).round() as u64).max(1);
                    let Some(cfg) = config_for(kind, cap(delay), delay)? else { continue };
                    let m = measure_drop_rate(&cfg, w.lambda_steps, delay, w.steps, w.seed)?;
                    out.push(BenchRecord {
                        workload: "droprate".into(),
                        kind,
                        capacity: cfg.capacity,
                        max_delay: cfg.max_delay,
                        batch: 1,
                        lambda: w.lambda_steps,
                        delay,
                        steps: w.steps,
                        reps: 1,
                        ns_per_step_per_queue: None,
                        drop_rate: m.rate,
                        spikes_in: m.offered,
                        spikes_out: m.offered - m.lost,
                        seed: w.seed,
                        platform: platform_label(),
                    });
                }
            }
        }
    }
    if !timed.is_empty() {
        out = run_inference_suite(&timed, base.timing)?;
    }
    Ok(out)
}
