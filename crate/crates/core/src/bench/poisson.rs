use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use super::{median, platform_label, BenchRecord, Timing, MIN_CONFIDENT_SPIKES};
use crate::error::{Error, Result};
use crate::queue::{AnyQueue, EventQueue, QueueConfig, QueueKind, SpikeEvent};

/// Independent per-queue spike trains, at most one spike per step with
/// probability `1 / lambda_steps`, each spike sent with a fixed delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonWorkload {
    pub lambda_steps: f64,
    pub delay_steps: u64,
    pub n_queues: usize,
    pub steps: u64,
    pub seed: u64,
}

impl PoissonWorkload {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_steps >= 1.0) || !self.lambda_steps.is_finite() {
            return Err(Error::Config(format!("lambda must be at least 1, got {}", self.lambda_steps)));
        }
        if self.delay_steps == 0 {
            return Err(Error::Config("delay must be at least one step".into()));
        }
        if self.n_queues == 0 || self.steps == 0 {
            return Err(Error::Config("batch and step count must be positive".into()));
        }
        Ok(())
    }

    /// Mean events in flight per queue.
    pub fn pressure(&self) -> f64 {
        self.delay_steps as f64 / self.lambda_steps
    }
}

/// Streaming generator: the next spike step of each queue, drawn as a
/// geometric gap (the waiting time of a per-step Bernoulli trial).
#[derive(Debug, Clone)]
pub struct PoissonStream {
    next: Vec<u64>,
    gaps: Geometric,
    rng: ChaCha8Rng,
}

impl PoissonStream {
    pub fn new(w: &PoissonWorkload) -> Result<Self> {
        w.validate()?;
        let gaps = Geometric::new(1.0 / w.lambda_steps).map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(w.seed);
        let next = (0..w.n_queues).map(|_| gaps.sample(&mut rng)).collect();
        Ok(PoissonStream { next, gaps, rng })
    }

    /// Whether queue `q` spikes at `step`; steps must be visited in order.
    #[inline]
    pub fn fires(&mut self, q: usize, step: u64) -> bool {
        if self.next[q] != step {
            return false;
        }
        self.next[q] = step + 1 + self.gaps.sample(&mut self.rng);
        true
    }
}

/// Spike steps of every queue over the whole run.
pub fn gen_poisson(w: &PoissonWorkload) -> Result<Vec<Vec<u64>>> {
    let mut stream = PoissonStream::new(w)?;
    let mut out = vec![Vec::new(); w.n_queues];
    for step in 0..w.steps {
        for (q, train) in out.iter_mut().enumerate() {
            if stream.fires(q, step) {
                train.push(step);
            }
        }
    }
    Ok(out)
}

/// Capacity used for a kind when none is requested.
pub fn default_capacity(kind: QueueKind, delay_steps: u64) -> usize {
    match kind {
        QueueKind::Ring | QueueKind::LossyRing => delay_steps as usize,
        QueueKind::FifoRing => 4,
        QueueKind::SortedArray => 8,
        QueueKind::BinaryHeap => 7,
        QueueKind::BitArray32 => 32,
        QueueKind::SingleSpikeHold | QueueKind::SingleSpikeDrop => 1,
        QueueKind::DoNothing | QueueKind::DenseOracle | QueueKind::Bgpq => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Counts {
    spikes_in: u64,
    spikes_out: u64,
    lost: u64,
}

fn drive<Q: EventQueue>(queues: &mut [Q], w: &PoissonWorkload) -> Result<Counts> {
    let mut stream = PoissonStream::new(w)?;
    let mut spikes_in = 0;
    let mut delivered = 0.0;
    for step in 0..w.steps {
        for (q, queue) in queues.iter_mut().enumerate() {
            if stream.fires(q, step) {
                spikes_in += 1;
                queue.enqueue(SpikeEvent::unit(step + w.delay_steps))?;
            }
            delivered += queue.pop_due().weight.primal;
        }
    }
    let lost = queues.iter().map(|q| q.stats().lost()).sum();
    Ok(Counts { spikes_in, spikes_out: delivered as u64, lost })
}

fn timed_drive<Q: EventQueue>(queues: &mut [Q], w: &PoissonWorkload) -> Result<(f64, Counts)> {
    let start = Instant::now();
    let c = drive(queues, w)?;
    Ok((start.elapsed().as_nanos() as f64, c))
}

/// Run on a batch of the concrete queue type behind `config`, so each kind
/// gets its own monomorphised loop.
fn time_once(config: &QueueConfig, w: &PoissonWorkload) -> Result<(f64, Counts)> {
    macro_rules! typed {
        ($($variant:ident),*) => {
            match config.build()? {
                $(AnyQueue::$variant(_) => {
                    let mut qs = Vec::with_capacity(w.n_queues);
                    for _ in 0..w.n_queues {
                        match config.build()? {
                            AnyQueue::$variant(q) => qs.push(q),
                            _ => unreachable!("build is deterministic in kind"),
                        }
                    }
                    timed_drive(&mut qs, w)
                })*
            }
        };
    }
    typed!(DoNothing, Ring, LossyRing, FifoRing, SingleSpike, SortedArray, BitArray32, BinaryHeap, DenseOracle)
}

/// Timed run of `w` on `n_queues` fresh queues; median of `timing.reps`.
pub fn run_inference_bench(config: &QueueConfig, w: &PoissonWorkload, timing: Timing) -> Result<BenchRecord> {
    let mut out = run_inference_suite(&[(*config, *w)], timing)?;
    Ok(out.remove(0))
}

/// Time several cases with their repetitions interleaved (every case runs
/// once per round), so slow drift of the machine is shared by all of them.
pub fn run_inference_suite(cases: &[(QueueConfig, PoissonWorkload)], timing: Timing) -> Result<Vec<BenchRecord>> {
    timing.check()?;
    for (_, w) in cases {
        w.validate()?;
    }
    let mut samples = vec![Vec::with_capacity(timing.reps as usize); cases.len()];
    let mut counts: Vec<Option<Counts>> = vec![None; cases.len()];
    for rep in 0..timing.warmup + timing.reps {
        for (i, (config, w)) in cases.iter().enumerate() {
            let (elapsed, c) = time_once(config, w)?;
            if counts[i].is_some_and(|prev| prev != c) {
                return Err(Error::Config(format!("rep {rep} changed spike counts; generator is not deterministic")));
            }
            counts[i] = Some(c);
            if rep >= timing.warmup {
                samples[i].push(elapsed / (w.steps as f64 * w.n_queues as f64));
            }
        }
    }
    let platform = platform_label();
    Ok(cases
        .iter()
        .zip(samples)
        .zip(counts)
        .map(|(((config, w), samples), c)| {
            let c = c.unwrap_or_default();
            BenchRecord {
                workload: if w.n_queues == 1 { "poisson_single".into() } else { "poisson_batched".into() },
                kind: config.kind,
                capacity: config.capacity,
                max_delay: config.max_delay,
                batch: w.n_queues,
                lambda: w.lambda_steps,
                delay: w.delay_steps,
                steps: w.steps,
                reps: timing.reps,
                ns_per_step_per_queue: Some(median(samples)),
                drop_rate: if c.spikes_in == 0 { 0.0 } else { c.lost as f64 / c.spikes_in as f64 },
                spikes_in: c.spikes_in,
                spikes_out: c.spikes_out,
                seed: w.seed,
                platform: platform.clone(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropMeasurement {
    pub rate: f64,
    pub offered: u64,
    pub lost: u64,
    /// Binomial standard error of `rate`.
    pub std_err: f64,
    /// Fewer than [`MIN_CONFIDENT_SPIKES`] spikes were generated.
    pub low_confidence: bool,
}

/// Fraction of offered spikes never delivered at their own step, for one
/// queue fed by a Poisson train. Aliased events count as lost.
pub fn measure_drop_rate(
    config: &QueueConfig,
    lambda_steps: f64,
    delay_steps: u64,
    steps: u64,
    seed: u64,
) -> Result<DropMeasurement> {
    let w = PoissonWorkload { lambda_steps, delay_steps, n_queues: 1, steps, seed };
    let mut q = [config.build()?];
    let c = drive(&mut q, &w)?;
    let rate = if c.spikes_in == 0 { 0.0 } else { c.lost as f64 / c.spikes_in as f64 };
    let std_err = if c.spikes_in == 0 { 0.0 } else { (rate * (1.0 - rate) / c.spikes_in as f64).sqrt() };
    Ok(DropMeasurement {
        rate,
        offered: c.spikes_in,
        lost: c.lost,
        std_err,
        low_confidence: c.spikes_in < MIN_CONFIDENT_SPIKES,
    })
}
