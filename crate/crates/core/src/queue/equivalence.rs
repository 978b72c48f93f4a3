//! Randomized trace comparison against the dense reference queue.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{AnyQueue, Capacity, DenseOracle, EventQueue, Pulse, QueueConfig, QueueKind, SpikeEvent};
use crate::ad::Dual;
use crate::error::{Error, Result};

/// One enqueue: `event` is offered while the queue clock reads `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub step: u64,
    pub event: SpikeEvent,
}

/// Shape of a random trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSpec {
    pub events: usize,
    /// Delays are drawn uniformly from `1..=max_delay` unless homogeneous.
    pub max_delay: u64,
    pub homogeneous_delay: Option<u64>,
    /// Mean enqueues per step (Poisson).
    pub rate: f64,
    /// Skip draws that would push the number of pending events past this.
    pub max_in_flight: Option<usize>,
    /// Skip draws that would share a delivery step with a pending event.
    pub distinct_delivery: bool,
    pub unit_weights: bool,
    pub gradients: bool,
    pub seed: u64,
}

impl TraceSpec {
    pub fn heterogeneous(events: usize, max_delay: u64, seed: u64) -> Self {
        TraceSpec {
            events,
            max_delay,
            homogeneous_delay: None,
            rate: 1.0,
            max_in_flight: None,
            distinct_delivery: false,
            unit_weights: false,
            gradients: true,
            seed,
        }
    }

    pub fn homogeneous(events: usize, delay: u64, seed: u64) -> Self {
        TraceSpec { homogeneous_delay: Some(delay), ..Self::heterogeneous(events, delay, seed) }
    }
}

/// Pending delivery counts keyed by step, for a step cursor that only moves
/// forward. Counts live in a power-of-two ring indexed by `step & mask`;
/// every stored key lies in `base..base + counts.len()`.
struct Pending {
    base: u64,
    counts: Vec<usize>,
    total: usize,
}

impl Default for Pending {
    fn default() -> Self {
        Pending { base: 0, counts: vec![0; 64], total: 0 }
    }
}

impl Pending {
    #[inline]
    fn mask(&self) -> u64 {
        self.counts.len() as u64 - 1
    }

    /// Forget everything due at or before `step`.
    #[inline]
    fn advance(&mut self, step: u64) {
        if step < self.base {
            return;
        }
        if self.total > 0 {
            let span = (step + 1 - self.base).min(self.counts.len() as u64);
            let mask = self.mask();
            for k in self.base..self.base + span {
                let c = &mut self.counts[(k & mask) as usize];
                self.total -= *c;
                *c = 0;
            }
        }
        self.base = step + 1;
    }

    /// Earliest pending delivery step.
    fn first(&self) -> Option<u64> {
        if self.total == 0 {
            return None;
        }
        let mask = self.mask();
        (self.base..self.base + self.counts.len() as u64).find(|&k| self.counts[(k & mask) as usize] > 0)
    }

    #[inline]
    fn contains(&self, deliver: u64) -> bool {
        deliver >= self.base
            && deliver - self.base < self.counts.len() as u64
            && self.counts[(deliver & self.mask()) as usize] > 0
    }

    #[inline]
    fn add(&mut self, deliver: u64) {
        let need = deliver - self.base + 1;
        if need > self.counts.len() as u64 {
            self.grow(need);
        }
        let i = (deliver & self.mask()) as usize;
        self.counts[i] += 1;
        self.total += 1;
    }

    fn grow(&mut self, need: u64) {
        let len = need.next_power_of_two() as usize;
        let mut counts = vec![0; len];
        let (old_mask, new_mask) = (self.mask(), len as u64 - 1);
        for k in self.base..self.base + self.counts.len() as u64 {
            counts[(k & new_mask) as usize] = self.counts[(k & old_mask) as usize];
        }
        self.counts = counts;
    }
}

/// Streaming generator behind [`random_trace`]; yields entries in step order.
pub struct TraceGen {
    spec: TraceSpec,
    rng: ChaCha8Rng,
    gaps: Exp<f64>,
    pending: Pending,
    t: f64,
    produced: usize,
}

impl TraceGen {
    pub fn new(spec: &TraceSpec) -> Result<Self> {
        if spec.max_delay == 0 || spec.homogeneous_delay == Some(0) {
            return Err(Error::Config("trace delays must be at least one step".into()));
        }
        if !(spec.rate > 0.0 && spec.rate.is_finite()) {
            return Err(Error::Config(format!("trace rate must be positive, got {}", spec.rate)));
        }
        if spec.max_in_flight == Some(0) {
            return Err(Error::Config("max_in_flight must be at least one".into()));
        }
        // Exponential gaps give Poisson(rate) arrivals per step without a
        // draw for every empty step.
        let gaps = Exp::new(spec.rate).map_err(|e| Error::Config(e.to_string()))?;
        Ok(TraceGen {
            spec: spec.clone(),
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            gaps,
            pending: Pending::default(),
            t: 0.0,
            produced: 0,
        })
    }
}

impl Iterator for TraceGen {
    type Item = TraceEntry;

    fn next(&mut self) -> Option<TraceEntry> {
        let spec = &self.spec;
        if self.produced == spec.events {
            return None;
        }
        loop {
            self.t += self.gaps.sample(&mut self.rng);
            let step = self.t as u64;
            self.pending.advance(step);
            let delay = match spec.homogeneous_delay {
                Some(d) => d,
                None => self.rng.random_range(1..=spec.max_delay),
            };
            let deliver = step + delay;
            // Arrivals are memoryless, so skipping the clock past a stretch
            // where every draw would be rejected leaves the trace law unchanged.
            if spec.max_in_flight.is_some_and(|m| self.pending.total >= m) {
                let free_at = self.pending.first().expect("queue full implies pending");
                self.t = self.t.max(free_at as f64);
                continue;
            }
            if spec.distinct_delivery && self.pending.contains(deliver) {
                if spec.homogeneous_delay.is_some() {
                    self.t = self.t.max((step + 1) as f64);
                }
                continue;
            }
            let rng = &mut self.rng;
            let weight = if spec.unit_weights {
                Dual::constant(1.0)
            } else {
                let mag = rng.random_range(0.1..2.0);
                let w = if rng.random_bool(0.5) { mag } else { -mag };
                Dual::new(w, if spec.gradients { rng.random_range(-1.0..1.0) } else { 0.0 })
            };
            let time_tangent = if spec.gradients { rng.random_range(-1.0..1.0) } else { 0.0 };
            self.pending.add(deliver);
            self.produced += 1;
            return Some(TraceEntry { step, event: SpikeEvent::new(deliver, weight, time_tangent) });
        }
    }
}

pub fn random_trace(spec: &TraceSpec) -> Result<Vec<TraceEntry>> {
    Ok(TraceGen::new(spec)?.collect())
}

/// Incremental form of [`validate_trace`]: feed entries in order.
pub struct TraceChecker {
    /// Kind names used in rejection messages.
    label: String,
    delay_bound: Option<u64>,
    slot_bound: Option<u64>,
    event_bound: Option<usize>,
    tangents_ok: bool,
    unit_only: bool,
    one_delay: bool,
    one_per_step: bool,
    /// Pending deliveries; only tracked when a capacity rule needs them.
    pending: Pending,
    first_delay: Option<u64>,
    last_step: u64,
    seen: usize,
}

impl TraceChecker {
    /// `check_capacity: false` skips the limits that only decide whether a
    /// queue would drop, so lossy kinds can be compared with each other.
    pub fn new(config: &QueueConfig, check_capacity: bool) -> Result<Self> {
        let caps = config.build()?.capabilities();
        // Ring slots merge, so the bound is on delay rather than on event count.
        let slot_bound = match config.kind {
            QueueKind::LossyRing if check_capacity => Some(config.capacity as u64),
            _ => None,
        };
        let event_bound = match (config.kind, caps.capacity) {
            (QueueKind::DoNothing | QueueKind::Ring | QueueKind::LossyRing, _) => None,
            (_, Capacity::Bounded(c)) if check_capacity => Some(c),
            _ => None,
        };
        let one_per_step = check_capacity && !caps.supports_multi_spike_per_step;
        Ok(TraceChecker {
            label: config.kind.to_string(),
            delay_bound: (config.kind != QueueKind::DenseOracle).then_some(config.max_delay),
            slot_bound,
            event_bound,
            tangents_ok: caps.supports_gradients,
            unit_only: config.kind == QueueKind::BitArray32,
            one_delay: !caps.supports_heterogeneous_delay,
            one_per_step,
            pending: Pending::default(),
            first_delay: None,
            last_step: 0,
            seen: 0,
        })
    }

    /// One checker enforcing the rules of every config at once: the
    /// tightest bounds and the union of the restrictions.
    pub fn for_all(configs: &[QueueConfig], check_capacity: bool) -> Result<Self> {
        let parts = configs.iter().map(|c| Self::new(c, check_capacity)).collect::<Result<Vec<_>>>()?;
        let min = |a: Option<u64>, b: Option<u64>| match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        let mut parts = parts.into_iter();
        let Some(mut out) = parts.next() else {
            return Err(Error::Config("no configs to check against".into()));
        };
        for p in parts {
            out.label = format!("{}/{}", out.label, p.label);
            out.delay_bound = min(out.delay_bound, p.delay_bound);
            out.slot_bound = min(out.slot_bound, p.slot_bound);
            out.event_bound =
                min(out.event_bound.map(|c| c as u64), p.event_bound.map(|c| c as u64)).map(|c| c as usize);
            out.tangents_ok &= p.tangents_ok;
            out.unit_only |= p.unit_only;
            out.one_delay |= p.one_delay;
            out.one_per_step |= p.one_per_step;
        }
        Ok(out)
    }

    pub fn check(&mut self, e: &TraceEntry) -> Result<()> {
        let track = self.needs_pending();
        if track {
            self.pending.advance(e.step);
        }
        self.check_against(e)?;
        if track {
            self.pending.add(e.event.deliver_step);
        }
        Ok(())
    }

    /// All rules. `pending` must already be advanced to `e.step`.
    #[inline]
    fn check_against(&mut self, e: &TraceEntry) -> Result<()> {
        let i = self.seen;
        self.seen += 1;
        let ev = &e.event;
        if e.step < self.last_step {
            return self.reject(i, format!("step {} goes back from {}", e.step, self.last_step));
        }
        self.last_step = e.step;
        if ev.deliver_step <= e.step {
            return self.reject(i, format!("delivery {} not after step {}", ev.deliver_step, e.step));
        }
        let delay = ev.deliver_step - e.step;
        if self.delay_bound.is_some_and(|m| delay > m) {
            return self.reject(i, format!("delay {delay} beyond max_delay {}", self.delay_bound.unwrap_or_default()));
        }
        if let Some(c) = self.slot_bound.filter(|&c| delay > c) {
            return self.reject(i, format!("delay {delay} would alias in {c} slots"));
        }
        if !self.tangents_ok && ev.carries_gradient() {
            return self.reject(i, format!("{} cannot carry tangents", self.label));
        }
        if self.unit_only && ev.weight.primal != 1.0 {
            return self.reject(i, format!("{} needs unit weights", self.label));
        }
        if self.one_delay {
            match self.first_delay {
                None => self.first_delay = Some(delay),
                Some(d) if d != delay => {
                    return self.reject(i, format!("{} needs one delay, saw {d} and {delay}", self.label))
                }
                _ => {}
            }
        }
        if !self.needs_pending() {
            return Ok(());
        }
        let pending = &self.pending;
        if self.one_per_step && pending.contains(ev.deliver_step) {
            return self.reject(i, format!("{} holds one spike per step", self.label));
        }
        if self.event_bound.is_some_and(|c| pending.total >= c) {
            return self.reject(i, format!("{} events already pending in {}", pending.total, self.label));
        }
        Ok(())
    }

    #[cold]
    fn reject(&self, i: usize, why: String) -> Result<()> {
        Err(Error::InvalidTrace(format!("entry {i}: {why}")))
    }

    #[inline]
    fn needs_pending(&self) -> bool {
        self.one_per_step || self.event_bound.is_some()
    }
}

/// Check that `trace` stays inside what `config` can represent losslessly.
pub fn validate_trace(trace: &[TraceEntry], config: &QueueConfig) -> Result<()> {
    validate(trace, config, true)
}

fn validate(trace: &[TraceEntry], config: &QueueConfig, check_capacity: bool) -> Result<()> {
    let mut checker = TraceChecker::new(config, check_capacity)?;
    trace.iter().try_for_each(|e| checker.check(e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub step: u64,
    pub expected: Pulse,
    pub got: Pulse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Equivalence {
    Equal,
    Diverged(Divergence),
}

impl Equivalence {
    pub fn is_equal(&self) -> bool {
        matches!(self, Equivalence::Equal)
    }
}

const REL_TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

fn pulses_match(a: &Pulse, b: &Pulse) -> bool {
    // a step either delivers in both or in neither
    a.is_zero() == b.is_zero()
        && close(a.weight.primal, b.weight.primal)
        && close(a.weight.tangent, b.weight.tangent)
        && close(a.weighted_time_tangent, b.weighted_time_tangent)
}

/// Per-step pulses from replaying `trace`, until every delivery step has passed.
pub fn replay<Q: EventQueue>(q: &mut Q, trace: &[TraceEntry]) -> Result<Vec<Pulse>> {
    let end = trace.iter().map(|e| e.event.deliver_step).max().unwrap_or(0);
    let mut out = Vec::with_capacity(end as usize + 1);
    let mut next = 0;
    for step in 0..=end {
        while next < trace.len() && trace[next].step == step {
            q.enqueue(trace[next].event)?;
            next += 1;
        }
        out.push(q.pop_due());
    }
    Ok(out)
}

/// First step at which two pulse sequences differ beyond the merge tolerance.
pub fn first_divergence(expected: &[Pulse], got: &[Pulse]) -> Equivalence {
    match expected.iter().zip(got).position(|(a, b)| !pulses_match(a, b)) {
        Some(i) => Equivalence::Diverged(Divergence { step: i as u64, expected: expected[i], got: got[i] }),
        None => Equivalence::Equal,
    }
}

/// Replay `trace` through `q`, comparing each popped pulse with `expected`
/// as it goes. `expected` must come from a replay of the same trace.
pub fn replay_against<Q: EventQueue>(q: &mut Q, trace: &[TraceEntry], expected: &[Pulse]) -> Result<Equivalence> {
    let mut next = 0;
    for (step, want) in expected.iter().enumerate() {
        while next < trace.len() && trace[next].step == step as u64 {
            q.enqueue(trace[next].event)?;
            next += 1;
        }
        let got = q.pop_due();
        if !pulses_match(want, &got) {
            return Ok(Equivalence::Diverged(Divergence { step: step as u64, expected: *want, got }));
        }
    }
    Ok(Equivalence::Equal)
}

/// Replay `trace` through the configured queue and through [`DenseOracle`],
/// reporting the first step whose pulses differ.
pub fn dense_oracle_equivalence(trace: &[TraceEntry], config: &QueueConfig) -> Result<Equivalence> {
    validate_trace(trace, config)?;
    let expected = replay(&mut DenseOracle::new(), trace)?;
    replay_against(&mut config.build()?, trace, &expected)
}

/// Like [`dense_oracle_equivalence`] with `b` as the reference. Capacity is
/// not checked, so kinds with matching drop behaviour can be compared on
/// overflowing traces.
pub fn compare_kinds(trace: &[TraceEntry], a: &QueueConfig, b: &QueueConfig) -> Result<Equivalence> {
    validate(trace, a, false)?;
    validate(trace, b, false)?;
    let expected = replay(&mut b.build()?, trace)?;
    replay_against(&mut a.build()?, trace, &expected)
}

/// Generate the trace of `spec` on the fly and drive `reference` and every
/// candidate in lockstep, so no trace or pulse sequence is stored. Entries are
/// validated against every config as they are produced (capacity limits
/// included when `check_capacity`). Returns one result per candidate.
pub fn lockstep_equivalence(
    spec: &TraceSpec,
    reference: &QueueConfig,
    candidates: &[QueueConfig],
    check_capacity: bool,
) -> Result<Vec<Equivalence>> {
    let all: Vec<QueueConfig> = std::iter::once(*reference).chain(candidates.iter().copied()).collect();
    let mut checker = TraceChecker::for_all(&all, check_capacity)?;
    let mut reference_q = reference.build()?;
    let mut queues = candidates.iter().map(|c| c.build()).collect::<Result<Vec<AnyQueue>>>()?;
    let mut results = vec![Equivalence::Equal; candidates.len()];
    let mut live = candidates.len();
    let mut gen = TraceGen::new(spec)?.peekable();
    let mut end = 0;
    let mut step = 0u64;
    while live > 0 && (gen.peek().is_some() || step <= end) {
        while let Some(e) = gen.next_if(|e| e.step == step) {
            checker.check(&e)?;
            end = end.max(e.event.deliver_step);
            reference_q.enqueue(e.event)?;
            for (q, r) in queues.iter_mut().zip(&results) {
                if r.is_equal() {
                    q.enqueue(e.event)?;
                }
            }
        }
        let want = reference_q.pop_due();
        for (q, r) in queues.iter_mut().zip(results.iter_mut()) {
            if !r.is_equal() {
                continue;
            }
            let got = q.pop_due();
            if !pulses_match(&want, &got) {
                *r = Equivalence::Diverged(Divergence { step, expected: want, got });
                live -= 1;
            }
        }
        step += 1;
    }
    Ok(results)
}
