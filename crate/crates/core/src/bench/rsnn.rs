use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{median, platform_label, BenchRecord, Timing};
use crate::ad::{Dual, Scalar};
use crate::error::Result;
use crate::network::{duration, Network, NetworkParams, SeedDirection};
use crate::queue::{make_queue, EventQueue, QueueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsnnMode {
    Inference,
    ForwardAd,
}

impl RsnnMode {
    pub fn name(self) -> &'static str {
        match self {
            RsnnMode::Inference => "inference",
            RsnnMode::ForwardAd => "forward_ad",
        }
    }
}

/// Delay in steps used for kinds that need one shared delay.
pub const HOMOGENEOUS_DELAY_STEPS: u32 = 20;

/// Random benchmark network for `kind`. Kinds without heterogeneous-delay
/// support get one shared delay of [`HOMOGENEOUS_DELAY_STEPS`].
pub fn rsnn_params_for(kind: QueueKind, n: usize, dt: f64, seed: u64) -> Result<NetworkParams> {
    let params = NetworkParams::random(n, dt, kind, seed)?;
    let heterogeneous = make_queue(kind, 64, 32)?.capabilities().supports_heterogeneous_delay;
    Ok(if heterogeneous { params } else { params.with_homogeneous_delay(HOMOGENEOUS_DELAY_STEPS) })
}

struct RunStats {
    offered: u64,
    accepted: u64,
    lost: u64,
    capacity: usize,
    max_delay: u64,
}

fn timed<S: Scalar>(params: &NetworkParams, seed: SeedDirection, steps: u64) -> Result<(f64, RunStats)> {
    let mut net = Network::<S>::build(params, seed, duration(params, steps))?;
    let start = Instant::now();
    net.run(steps)?;
    let elapsed = start.elapsed().as_nanos() as f64;
    let stats = net.queue_stats();
    let cfg = net.queue_config();
    Ok((
        elapsed,
        RunStats {
            offered: stats.offered,
            accepted: stats.accepted,
            lost: stats.lost(),
            capacity: cfg.capacity,
            max_delay: cfg.max_delay,
        },
    ))
}

/// Median wall time per step per neuron of the recurrent network.
/// Forward mode seeds the weight of edge `0 -> 1`.
pub fn run_rsnn_bench(
    params: &NetworkParams,
    mode: RsnnMode,
    steps: u64,
    timing: Timing,
    seed: u64,
) -> Result<BenchRecord> {
    let mut out = run_rsnn_suite(&[(params.clone(), mode)], steps, timing, seed)?;
    Ok(out.remove(0))
}

/// Several network runs with repetitions interleaved, one of each per round.
pub fn run_rsnn_suite(
    cases: &[(NetworkParams, RsnnMode)],
    steps: u64,
    timing: Timing,
    seed: u64,
) -> Result<Vec<BenchRecord>> {
    timing.check()?;
    let mut samples = vec![Vec::with_capacity(timing.reps as usize); cases.len()];
    let mut last: Vec<Option<RunStats>> = (0..cases.len()).map(|_| None).collect();
    for rep in 0..timing.warmup + timing.reps {
        for (i, (params, mode)) in cases.iter().enumerate() {
            let (ns, stats) = match mode {
                RsnnMode::Inference => timed::<f64>(params, SeedDirection::None, steps)?,
                RsnnMode::ForwardAd => timed::<Dual>(params, SeedDirection::Weight { pre: 0, post: 1 }, steps)?,
            };
            if rep >= timing.warmup {
                samples[i].push(ns / (steps as f64 * params.n as f64));
            }
            last[i] = Some(stats);
        }
    }
    let platform = platform_label();
    Ok(cases
        .iter()
        .zip(samples)
        .zip(last)
        .map(|(((params, mode), samples), s)| {
            let s = s.expect("at least one rep");
            BenchRecord {
                workload: format!("rsnn_{}", mode.name()),
                kind: params.queue,
                capacity: s.capacity,
                max_delay: s.max_delay,
                batch: params.n,
                lambda: 0.0,
                delay: s.max_delay,
                steps,
                reps: timing.reps,
                ns_per_step_per_queue: Some(median(samples)),
                drop_rate: if s.offered == 0 { 0.0 } else { s.lost as f64 / s.offered as f64 },
                spikes_in: s.offered,
                spikes_out: s.accepted,
                seed,
                platform: platform.clone(),
            }
        })
        .collect())
}
