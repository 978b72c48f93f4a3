//! All-to-all recurrent LIF network wired through event queues.

use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::ad::{Dual, Scalar};
use crate::error::{Capability, Error, Result};
use crate::grad::{compose_delay, ThresholdCrossing};
use crate::neuro::{FirstOrderSynapse, LifNeuron};
use crate::queue::{make_queue, AnyQueue, EventQueue, Pulse, QueueConfig, QueueKind, QueueStats, SpikeEvent};

/// Tolerance, in steps, when turning a continuous arrival time into a step index.
const STEP_EPS: f64 = 1e-9;

/// Poisson current kicks in continuous time, independent of `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Mean kicks per neuron per time unit.
    pub rate: f64,
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub n: usize,
    /// Row-major `n x n`, indexed `[pre * n + post]`; the diagonal is ignored.
    pub weights: Vec<f64>,
    /// Same layout as `weights`, in time units.
    pub delays: Vec<f64>,
    pub bias: Vec<f64>,
    /// Target voltages for the loss.
    pub target: Vec<f64>,
    pub tau_m: f64,
    pub tau_syn: f64,
    pub v_th: f64,
    pub v_reset: f64,
    pub refractory_steps: u32,
    pub dt: f64,
    pub queue: QueueKind,
    /// Queue capacity; `None` picks the delay horizon for rings and 64 otherwise.
    pub capacity: Option<usize>,
    pub drive: DriveParams,
}

impl NetworkParams {
    /// Random network with `tau_m = 1`: weights from N(0, 0.3), delays uniform
    /// in [0.05, 0.5], biases uniform in [1.5, 2.5].
    pub fn random(n: usize, dt: f64, queue: QueueKind, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("network needs at least two neurons, got {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.3).expect("valid normal");
        let mut weights = vec![0.0; n * n];
        let mut delays = vec![0.0; n * n];
        for pre in 0..n {
            for post in 0..n {
                if pre != post {
                    weights[pre * n + post] = normal.sample(&mut rng);
                    delays[pre * n + post] = rng.random_range(0.05..0.5);
                }
            }
        }
        let bias = (0..n).map(|_| rng.random_range(1.5..2.5)).collect();
        Ok(NetworkParams {
            n,
            weights,
            delays,
            bias,
            target: vec![0.0; n],
            tau_m: 1.0,
            tau_syn: 0.5,
            v_th: 1.0,
            v_reset: 0.0,
            refractory_steps: 0,
            dt,
            queue,
            capacity: None,
            drive: DriveParams { rate: 10.0, amplitude: 0.2, seed: seed ^ 0x5eed },
        })
    }

    /// Every off-diagonal delay set to `steps * dt`.
    pub fn with_homogeneous_delay(mut self, steps: u32) -> Self {
        let d = steps as f64 * self.dt;
        for pre in 0..self.n {
            for post in 0..self.n {
                if pre != post {
                    self.delays[pre * self.n + post] = d;
                }
            }
        }
        self
    }

    /// Same network on a different time grid.
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < 2 {
            return Err(Error::Config(format!("network needs at least two neurons, got {n}")));
        }
        for (name, len) in [
            ("weights", self.weights.len()),
            ("delays", self.delays.len()),
            ("bias", self.bias.len() * n),
            ("target", self.target.len() * n),
        ] {
            if len != n * n {
                return Err(Error::Config(format!("{name} has the wrong length for n = {n}")));
            }
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        for pre in 0..n {
            for post in 0..n {
                let d = self.delays[pre * n + post];
                if pre != post && !(d >= self.dt - STEP_EPS * self.dt) {
                    return Err(Error::Config(format!(
                        "delay {d} on edge {pre}->{post} is shorter than dt = {}",
                        self.dt
                    )));
                }
            }
        }
        if !(self.drive.rate >= 0.0) {
            return Err(Error::Config(format!("drive rate must be non-negative, got {}", self.drive.rate)));
        }
        Ok(())
    }

    fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |pre| (0..n).filter(move |&post| post != pre).map(move |post| (pre, post)))
    }

    /// Copy with the seeded scalar moved by `delta`.
    pub fn perturbed(&self, seed: SeedDirection, delta: f64) -> Self {
        let mut p = self.clone();
        match seed {
            SeedDirection::None => {}
            SeedDirection::Weight { pre, post } => p.weights[pre * p.n + post] += delta,
            SeedDirection::Delay { pre, post } => p.delays[pre * p.n + post] += delta,
            SeedDirection::Bias { neuron } => p.bias[neuron] += delta,
        }
        p
    }
}

/// Steps from enqueue to delivery for an arrival `frac + d/dt` steps after the
/// start of the emitting step. Returns the step offset and the leftover time
/// between arrival and the end of the delivery step.
#[inline]
fn delivery_offset(frac: f64, d: f64, dt: f64) -> (u64, f64) {
    let x = frac + d / dt;
    let m = ((x - STEP_EPS).ceil() - 2.0).max(1.0);
    (m as u64, (m + 2.0 - x) * dt)
}

fn horizon_steps(d: f64, dt: f64) -> u64 {
    delivery_offset(1.0, d, dt).0
}

/// The one scalar parameter carrying tangent 1 in a forward-mode run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeedDirection {
    None,
    Weight { pre: usize, post: usize },
    Delay { pre: usize, post: usize },
    Bias { neuron: usize },
}

impl SeedDirection {
    fn check(self, n: usize) -> Result<()> {
        let ok = match self {
            SeedDirection::None => true,
            SeedDirection::Weight { pre, post } | SeedDirection::Delay { pre, post } => {
                pre < n && post < n && pre != post
            }
            SeedDirection::Bias { neuron } => neuron < n,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("seed {self} does not name a parameter of an n = {n} network")))
        }
    }

    /// Every weight and delay direction of an `n` neuron network.
    pub fn all_edges(n: usize) -> Vec<SeedDirection> {
        let mut out = Vec::new();
        for pre in 0..n {
            for post in 0..n {
                if pre != post {
                    out.push(SeedDirection::Weight { pre, post });
                    out.push(SeedDirection::Delay { pre, post });
                }
            }
        }
        out
    }

    /// `count` random weight or delay directions of an `n` neuron network.
    pub fn sample(n: usize, count: usize, seed: u64) -> Result<Vec<SeedDirection>> {
        if n < 2 {
            return Err(Error::Config(format!("need at least two neurons to pick an edge, got {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count)
            .map(|_| {
                let pre = rng.random_range(0..n);
                let post = (pre + rng.random_range(1..n)) % n;
                if rng.random_bool(0.5) {
                    SeedDirection::Weight { pre, post }
                } else {
                    SeedDirection::Delay { pre, post }
                }
            })
            .collect())
    }
}

impl fmt::Display for SeedDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedDirection::None => f.write_str("none"),
            SeedDirection::Weight { pre, post } => write!(f, "weight:{pre}:{post}"),
            SeedDirection::Delay { pre, post } => write!(f, "delay:{pre}:{post}"),
            SeedDirection::Bias { neuron } => write!(f, "bias:{neuron}"),
        }
    }
}

impl FromStr for SeedDirection {
    type Err = Error;

    /// `none`, `weight:PRE:POST`, `delay:PRE:POST` or `bias:NEURON`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad seed direction `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let idx = |i: usize| parts.get(i).and_then(|p| p.parse::<usize>().ok()).ok_or_else(bad);
        match (parts[0].to_ascii_lowercase().as_str(), parts.len()) {
            ("none", 1) => Ok(SeedDirection::None),
            ("weight", 3) => Ok(SeedDirection::Weight { pre: idx(1)?, post: idx(2)? }),
            ("delay", 3) => Ok(SeedDirection::Delay { pre: idx(1)?, post: idx(2)? }),
            ("bias", 2) => Ok(SeedDirection::Bias { neuron: idx(1)? }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Wiring {
    PerNeuron,
    PerEdge,
}

/// Result of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub loss: Dual,
    pub spike_count: u64,
    pub drop_count: u64,
    pub final_v: Vec<Dual>,
    /// Digest of spike times and delivery steps; equal digests mean the same
    /// discrete event structure.
    pub structure: u64,
}

/// Network state over scalar type `S`: `f64` for inference, [`Dual`] for one
/// forward-mode direction.
#[derive(Debug, Clone)]
pub struct Network<S> {
    n: usize,
    dt: f64,
    tau_syn: f64,
    weights: Vec<Dual>,
    delays: Vec<Dual>,
    bias: Vec<S>,
    target: Vec<f64>,
    neurons: Vec<LifNeuron<S>>,
    synapses: Vec<FirstOrderSynapse<S>>,
    queues: Vec<AnyQueue>,
    queue_config: QueueConfig,
    wiring: Wiring,
    unit_spikes: bool,
    drive: Vec<Vec<(f64, f64)>>,
    drive_next: Vec<usize>,
    step: u64,
    forced: Vec<usize>,
    crossings: Vec<(usize, ThresholdCrossing)>,
    spike_count: u64,
    digest: DefaultHasher,
    raster: Vec<(u64, usize)>,
    trace: Option<Vec<f64>>,
}

fn drive_events(p: &NetworkParams, duration: f64) -> Vec<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.drive.seed);
    (0..p.n)
        .map(|_| {
            let mut out = Vec::new();
            if p.drive.rate <= 0.0 || p.drive.amplitude == 0.0 {
                return out;
            }
            let gaps = Exp::new(p.drive.rate).expect("positive rate");
            let mut t = gaps.sample(&mut rng);
            while t < duration {
                out.push((t, p.drive.amplitude));
                t += gaps.sample(&mut rng);
            }
            out
        })
        .collect()
}

impl<S: Scalar> Network<S> {
    /// Fresh state at step 0 (`v = v_reset`, synapses and queues empty) with
    /// drive generated for `duration` time units.
    pub fn build(params: &NetworkParams, seed: SeedDirection, duration: f64) -> Result<Self> {
        params.validate()?;
        seed.check(params.n)?;
        let n = params.n;
        let kind = params.queue;
        if !S::TRACKS_TANGENT && seed != SeedDirection::None {
            return Err(Error::Config("a primal-only network cannot carry a seeded direction".into()));
        }
        let probe = make_queue(kind, 1, 1).or_else(|_| make_queue(kind, 64, 64))?;
        let caps = probe.capabilities();
        if S::TRACKS_TANGENT && !caps.supports_gradients {
            return Err(Error::Unsupported {
                kind,
                capability: Capability::Gradients,
                context: Some("forward-mode network".into()),
            });
        }
        if !caps.supports_heterogeneous_delay {
            let d0 = params.delays[1];
            for (pre, post) in params.edges() {
                let d = params.delays[pre * n + post];
                let steps = d / params.dt;
                if d != d0 || (steps - steps.round()).abs() > STEP_EPS {
                    return Err(Error::Unsupported {
                        kind,
                        capability: Capability::HeterogeneousDelay,
                        context: Some(format!(
                            "edge {pre}->{post} has delay {d}; needs one delay that is a whole number of steps"
                        )),
                    });
                }
            }
        }
        let max_delay = params
            .edges()
            .map(|(pre, post)| horizon_steps(params.delays[pre * n + post], params.dt))
            .max()
            .unwrap_or(1);
        let capacity = params.capacity.unwrap_or(match kind {
            QueueKind::Ring | QueueKind::LossyRing => max_delay as usize,
            _ => 64,
        });
        let wiring = if kind.needs_per_edge_wiring() { Wiring::PerEdge } else { Wiring::PerNeuron };
        let count = match wiring {
            Wiring::PerNeuron => n,
            Wiring::PerEdge => n * n,
        };
        let mut queues = Vec::with_capacity(count);
        for _ in 0..count {
            let mut q = make_queue(kind, capacity, max_delay)?;
            // network step k consumes queue step k
            q.pop_due();
            queues.push(q);
        }

        let mut weights: Vec<Dual> = params.weights.iter().map(|&w| Dual::constant(w)).collect();
        let mut delays: Vec<Dual> = params.delays.iter().map(|&d| Dual::constant(d)).collect();
        let mut bias: Vec<S> = params.bias.iter().map(|&b| S::constant(b)).collect();
        match seed {
            SeedDirection::None => {}
            SeedDirection::Weight { pre, post } => weights[pre * n + post].tangent = 1.0,
            SeedDirection::Delay { pre, post } => delays[pre * n + post].tangent = 1.0,
            SeedDirection::Bias { neuron } => bias[neuron] = S::from_parts(params.bias[neuron], 1.0),
        }

        let neuron = LifNeuron::new(params.tau_m, params.v_th, params.v_reset, params.refractory_steps, params.dt)?;
        let synapse = FirstOrderSynapse::new(params.tau_syn, params.dt)?;
        Ok(Network {
            n,
            dt: params.dt,
            tau_syn: params.tau_syn,
            weights,
            delays,
            bias,
            target: params.target.clone(),
            neurons: vec![neuron; n],
            synapses: vec![synapse; n],
            queues,
            queue_config: QueueConfig::new(kind, capacity, max_delay),
            wiring,
            unit_spikes: kind == QueueKind::BitArray32,
            drive: drive_events(params, duration),
            drive_next: vec![0; n],
            step: 0,
            forced: Vec::new(),
            crossings: Vec::with_capacity(n),
            spike_count: 0,
            digest: DefaultHasher::new(),
            raster: Vec::new(),
            trace: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Steps taken so far.
    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn voltages(&self) -> Vec<S> {
        self.neurons.iter().map(|x| x.v).collect()
    }

    pub fn synaptic_currents(&self) -> Vec<S> {
        self.synapses.iter().map(|x| x.i_syn).collect()
    }

    /// `(step, neuron)` for every spike so far.
    pub fn raster(&self) -> &[(u64, usize)] {
        &self.raster
    }

    /// Configuration shared by every queue of the network.
    pub fn queue_config(&self) -> QueueConfig {
        self.queue_config
    }

    pub fn queue_count(&self) -> usize {
        self.queues.len()
    }

    pub fn queue_stats(&self) -> QueueStats {
        let mut total = QueueStats::default();
        for q in &self.queues {
            total += q.stats();
        }
        total
    }

    /// Keep every step's voltages for [`Network::voltage_trace`].
    pub fn record_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    /// Recorded voltages, `n` per step.
    pub fn voltage_trace(&self) -> Option<&[f64]> {
        self.trace.as_deref()
    }

    /// Make `neuron` spike at the end of the next step, whatever its voltage.
    pub fn force_spike(&mut self, neuron: usize) -> Result<()> {
        if neuron >= self.n {
            return Err(Error::Config(format!("no neuron {neuron} in an n = {} network", self.n)));
        }
        self.forced.push(neuron);
        Ok(())
    }

    fn gather(&mut self, post: usize) -> Pulse {
        match self.wiring {
            Wiring::PerNeuron => self.queues[post].pop_due(),
            Wiring::PerEdge => {
                let n = self.n;
                let mut pulse = Pulse::ZERO;
                for pre in 0..n {
                    let p = self.queues[pre * n + post].pop_due();
                    if pre == post || p.is_zero() {
                        continue;
                    }
                    if self.unit_spikes {
                        let w = self.weights[pre * n + post].primal;
                        pulse.weight.primal += p.weight.primal * w;
                    } else {
                        pulse += p;
                    }
                }
                pulse
            }
        }
    }

    /// Advance one step: deliver, integrate, detect spikes, fan them out.
    pub fn step(&mut self) -> Result<()> {
        self.step += 1;
        let k = self.step;
        let t_end = k as f64 * self.dt;
        self.crossings.clear();
        for j in 0..self.n {
            let pulse = self.gather(j);
            self.synapses[j].step(&pulse);
            let events = &self.drive[j];
            let mut next = self.drive_next[j];
            while next < events.len() && events[next].0 <= t_end {
                let (t, amp) = events[next];
                let kick = amp * (-(t_end - t) / self.tau_syn).exp();
                self.synapses[j].i_syn += S::constant(kick);
                next += 1;
            }
            self.drive_next[j] = next;
            let i_in = self.synapses[j].i_syn + self.bias[j];
            if let Some(c) = self.neurons[j].step(i_in, k)? {
                self.crossings.push((j, c));
            }
        }
        for f in std::mem::take(&mut self.forced) {
            if self.crossings.iter().any(|(j, _)| *j == f) {
                continue;
            }
            let nr = &mut self.neurons[f];
            nr.v = S::constant(nr.v_reset);
            let c = ThresholdCrossing { step: k, t_spk: t_end, v_dot: 0.0, dt_dtheta: 0.0, frac: 1.0, v_tangent: 0.0 };
            self.crossings.push((f, c));
        }
        for idx in 0..self.crossings.len() {
            let (pre, c) = self.crossings[idx];
            self.spike_count += 1;
            self.raster.push((k, pre));
            (k, pre).hash(&mut self.digest);
            self.fan_out(pre, &c)?;
        }
        if let Some(trace) = self.trace.as_mut() {
            trace.extend(self.neurons.iter().map(|x| x.v.primal()));
        }
        Ok(())
    }

    fn fan_out(&mut self, pre: usize, c: &ThresholdCrossing) -> Result<()> {
        let n = self.n;
        for post in 0..n {
            if post == pre {
                continue;
            }
            let e = pre * n + post;
            let d = self.delays[e];
            let (offset, lag) = delivery_offset(c.frac, d.primal, self.dt);
            let qi = match self.wiring {
                Wiring::PerNeuron => post,
                Wiring::PerEdge => e,
            };
            let q = &mut self.queues[qi];
            let deliver = q.now() + offset;
            let ev = if self.unit_spikes {
                SpikeEvent::unit(deliver)
            } else {
                // the spike lands `lag` before the end of its delivery step
                let w = self.weights[e].scale((-lag / self.tau_syn).exp());
                let time_tangent = if S::TRACKS_TANGENT { compose_delay(c, d).1 } else { 0.0 };
                SpikeEvent::new(deliver, w, time_tangent)
            };
            let kept = q.enqueue(ev)?;
            (e, deliver, kept).hash(&mut self.digest);
        }
        Ok(())
    }

    pub fn loss(&self) -> S {
        self.neurons
            .iter()
            .zip(&self.target)
            .map(|(nr, &t)| {
                let diff = nr.v - S::constant(t);
                diff * diff
            })
            .fold(S::constant(0.0), |a, b| a + b)
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn outcome(&self) -> SimOutcome {
        SimOutcome {
            loss: self.loss().to_dual(),
            spike_count: self.spike_count,
            drop_count: self.queue_stats().lost(),
            final_v: self.neurons.iter().map(|x| x.v.to_dual()).collect(),
            structure: self.digest.finish(),
        }
    }

    /// Raster as CSV rows `step,neuron,value` with value 1.
    pub fn write_raster_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "neuron", "value"])?;
        for (step, neuron) in &self.raster {
            w.serialize((step, neuron, 1.0))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Recorded voltages as CSV rows `step,neuron,value`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let trace = self.trace.as_ref().ok_or_else(|| Error::Config("voltage recording was not enabled".into()))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "neuron", "value"])?;
        for (i, v) in trace.iter().enumerate() {
            w.serialize(((i / self.n) as u64 + 1, i % self.n, v))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Duration covered by `steps` steps of `params`.
pub fn duration(params: &NetworkParams, steps: u64) -> f64 {
    steps as f64 * params.dt
}

/// Build and run a network for `steps` steps in forward mode along `seed`.
pub fn simulate(params: &NetworkParams, seed: SeedDirection, steps: u64) -> Result<SimOutcome> {
    if steps == 0 {
        return Err(Error::Config("a run needs at least one step".into()));
    }
    let mut net = Network::<Dual>::build(params, seed, duration(params, steps))?;
    net.run(steps)?;
    Ok(net.outcome())
}

/// Primal-only run.
pub fn simulate_inference(params: &NetworkParams, steps: u64) -> Result<SimOutcome> {
    if steps == 0 {
        return Err(Error::Config("a run needs at least one step".into()));
    }
    let mut net = Network::<f64>::build(params, SeedDirection::None, duration(params, steps))?;
    net.run(steps)?;
    Ok(net.outcome())
}

/// Central difference of the loss along `seed`. Refuses directions whose
/// `±epsilon` runs change the spike times or any delivery step.
pub fn grad_fd_oracle(params: &NetworkParams, seed: SeedDirection, steps: u64, epsilon: f64) -> Result<f64> {
    seed.check(params.n)?;
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let base = simulate_inference(params, steps)?;
    let plus = simulate_inference(&params.perturbed(seed, epsilon), steps)?;
    let minus = simulate_inference(&params.perturbed(seed, -epsilon), steps)?;
    for (side, run) in [("+", &plus), ("-", &minus)] {
        if run.spike_count != base.spike_count {
            return Err(Error::NonSmooth {
                detail: format!(
                    "spike count {} -> {} at {side}{epsilon} along {seed}",
                    base.spike_count, run.spike_count
                ),
            });
        }
        if run.structure != base.structure {
            return Err(Error::NonSmooth {
                detail: format!("spike or delivery steps moved at {side}{epsilon} along {seed}"),
            });
        }
    }
    Ok((plus.loss.primal - minus.loss.primal) / (2.0 * epsilon))
}
