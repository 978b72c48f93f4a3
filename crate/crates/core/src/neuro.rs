//! Synapse and neuron state updates with exact exponential integration.

use std::collections::VecDeque;

use crate::ad::{decay_factor, Dual, Scalar};
use crate::error::{Error, Result};
use crate::grad::{apply_jump_pulse, detect_crossing, ThresholdCrossing};
use crate::queue::Pulse;

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// Current that decays with `tau` and jumps on each delivered pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderSynapse<S> {
    pub i_syn: S,
    tau: f64,
    decay: f64,
}

impl<S: Scalar> FirstOrderSynapse<S> {
    pub fn new(tau_syn: f64, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        Ok(FirstOrderSynapse { i_syn: S::constant(0.0), tau: tau_syn, decay: decay_factor(dt, tau_syn)? })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Decay over one step, then apply the pulse delivered at its end.
    #[inline]
    pub fn step(&mut self, pulse: &Pulse) {
        self.i_syn = self.i_syn * self.decay;
        if !pulse.is_zero() {
            self.i_syn = apply_jump_pulse(self.i_syn, pulse, self.tau);
        }
    }
}

/// Conductance synapse driven by a rise state `b` and a decay state `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleExpSynapse<S> {
    pub a: S,
    pub b: S,
    tau_a: f64,
    tau_b: f64,
    decay_a: f64,
    decay_b: f64,
    pub e_syn: f64,
}

impl<S: Scalar> DoubleExpSynapse<S> {
    /// Smallest accepted `|tau_a - tau_b|`, relative to `tau_b`.
    pub const MIN_TAU_GAP: f64 = 1e-3;

    pub fn new(tau_a: f64, tau_b: f64, e_syn: f64, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        let decay_a = decay_factor(dt, tau_a)?;
        let decay_b = decay_factor(dt, tau_b)?;
        if (tau_a - tau_b).abs() < Self::MIN_TAU_GAP * tau_b {
            return Err(Error::Config(format!(
                "time constants {tau_a} and {tau_b} are too close; the response degenerates"
            )));
        }
        let zero = S::constant(0.0);
        Ok(DoubleExpSynapse { a: zero, b: zero, tau_a, tau_b, decay_a, decay_b, e_syn })
    }

    #[inline]
    pub fn step(&mut self, pulse: &Pulse) {
        self.a = self.a * self.decay_a;
        self.b = self.b * self.decay_b;
        if !pulse.is_zero() {
            self.a = apply_jump_pulse(self.a, pulse, self.tau_a);
            self.b = apply_jump_pulse(self.b, pulse, self.tau_b);
        }
    }

    pub fn current(&self, v_post: S) -> S {
        (self.a - self.b) * (v_post - S::constant(self.e_syn))
    }
}

/// Leaky integrate-and-fire membrane, `v' = (i - v) / tau_m`, with hard reset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifNeuron<S> {
    pub v: S,
    pub tau_m: f64,
    pub v_th: f64,
    pub v_reset: f64,
    pub refractory_steps: u32,
    pub refractory_remaining: u32,
    dt: f64,
    decay: f64,
}

impl<S: Scalar> LifNeuron<S> {
    pub fn new(tau_m: f64, v_th: f64, v_reset: f64, refractory_steps: u32, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        let decay = decay_factor(dt, tau_m)?;
        if !(v_reset < v_th) {
            return Err(Error::Config(format!("reset {v_reset} must lie below threshold {v_th}")));
        }
        Ok(LifNeuron {
            v: S::constant(v_reset),
            tau_m,
            v_th,
            v_reset,
            refractory_steps,
            refractory_remaining: 0,
            dt,
            decay,
        })
    }

    /// Advance from `(step - 1) * dt` to `step * dt` with `i_in` held constant.
    ///
    /// On a crossing the membrane restarts from `v_reset` at the interpolated
    /// spike time and relaxes exactly for the rest of the step, so the voltage
    /// tangent carries the spike-time dependence of the reset.
    #[inline]
    pub fn step(&mut self, i_in: S, step: u64) -> Result<Option<ThresholdCrossing>> {
        if self.refractory_remaining > 0 {
            self.refractory_remaining -= 1;
            self.v = S::constant(self.v_reset);
            return Ok(None);
        }
        let v_prev = self.v;
        let v_curr = i_in + (v_prev - i_in) * self.decay;
        let Some(c) = detect_crossing(v_prev, v_curr, self.v_th, step, self.dt)? else {
            self.v = v_curr;
            return Ok(None);
        };
        if self.refractory_steps > 0 {
            self.refractory_remaining = self.refractory_steps;
            self.v = S::constant(self.v_reset);
            return Ok(Some(c));
        }
        let rest = (1.0 - c.frac) * self.dt;
        let e = (-rest / self.tau_m).exp();
        // d(rest)/dθ = -dt_dtheta
        let relax = S::from_parts(e, e * c.dt_dtheta / self.tau_m);
        self.v = i_in + (S::constant(self.v_reset) - i_in) * relax;
        Ok(Some(c))
    }
}

/// Ring buffer delaying a sampled continuous signal by `round(d / dt)` steps.
///
/// The output tangent adds the chain-rule term for a differentiable delay:
/// `y_out' = y_in'(t - d) - ydot(t - d) * d'`, with `ydot` from the two oldest samples.
#[derive(Debug, Clone)]
pub struct ContinuousDelayLine {
    buf: VecDeque<Dual>,
    d: Dual,
    lag: usize,
    dt: f64,
}

impl ContinuousDelayLine {
    pub fn new(d: Dual, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        if !(d.primal >= 0.0) || !d.primal.is_finite() {
            return Err(Error::Config(format!("delay must be non-negative, got {}", d.primal)));
        }
        let lag = ((d.primal / dt).round() as usize).max(1);
        Ok(ContinuousDelayLine { buf: VecDeque::from(vec![Dual::ZERO; lag + 2]), d, lag, dt })
    }

    /// Delay in steps.
    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn step(&mut self, y_in: Dual) -> Dual {
        self.buf.pop_front();
        self.buf.push_back(y_in);
        let (older, read) = (self.buf[0], self.buf[1]);
        let y_dot = (read.primal - older.primal) / self.dt;
        Dual::new(read.primal, read.tangent - y_dot * self.d.tangent)
    }
}
