//! Tangent rules for spike times, delays and state jumps.

use crate::ad::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::queue::Pulse;

/// Below this slope (volts per time unit) a crossing counts as grazing and
/// its spike-time derivative is refused.
pub const GRAZING_FLOOR: f64 = 1e-9;

/// An upward threshold crossing located by linear interpolation inside one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdCrossing {
    /// First step index with `v >= v_th`.
    pub step: u64,
    pub t_spk: f64,
    /// Backward-difference slope over the crossing step.
    pub v_dot: f64,
    pub dt_dtheta: f64,
    /// Position of the crossing inside the step, in `(0, 1]`.
    pub frac: f64,
    /// Voltage tangent interpolated to the crossing.
    pub v_tangent: f64,
}

/// Locate an upward crossing of `v_th` between the samples at `step - 1` and `step`.
pub fn detect_crossing<S: Scalar>(
    v_prev: S,
    v_curr: S,
    v_th: f64,
    step: u64,
    dt: f64,
) -> Result<Option<ThresholdCrossing>> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let (vp, vc) = (v_prev.primal(), v_curr.primal());
    if !(vp < v_th && v_th <= vc) {
        return Ok(None);
    }
    let v_dot = (vc - vp) / dt;
    if v_dot < GRAZING_FLOOR {
        return Err(Error::GrazingCrossing { step, v_dot });
    }
    let frac = (v_th - vp) / (vc - vp);
    let t_spk = (step as f64 - 1.0) * dt + frac * dt;
    let v_tangent = (1.0 - frac) * v_prev.tangent() + frac * v_curr.tangent();
    Ok(Some(ThresholdCrossing { step, t_spk, v_dot, dt_dtheta: -v_tangent / v_dot, frac, v_tangent }))
}

/// Arrival time of the spike behind `crossing` over a delay `d`, and its tangent.
pub fn compose_delay(crossing: &ThresholdCrossing, d: Dual) -> (f64, f64) {
    (crossing.t_spk + d.primal, crossing.dt_dtheta + d.tangent)
}

/// Jump of magnitude `w` on a state that decays as `x' = -x / tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapseJump {
    pub tau: f64,
    pub w: Dual,
}

impl SynapseJump {
    pub fn new(tau: f64, w: Dual) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Config(format!("time constant must be positive, got {tau}")));
        }
        Ok(SynapseJump { tau, w })
    }
}

/// Tangent of a state across a discontinuity at time `t`:
/// `x+' = x-' + dx' + (xdot- - xdot+) t'`.
pub fn state_jump(x_minus: Dual, jump: Dual, xdot_minus: f64, xdot_plus: f64, t_tangent: f64) -> Dual {
    Dual::new(x_minus.primal + jump.primal, x_minus.tangent + jump.tangent + (xdot_minus - xdot_plus) * t_tangent)
}

/// Apply one arriving spike to a decaying state.
pub fn apply_jump(x: Dual, jump: &SynapseJump, time_tangent: f64) -> Dual {
    let xdot_minus = -x.primal / jump.tau;
    let xdot_plus = -(x.primal + jump.w.primal) / jump.tau;
    state_jump(x, jump.w, xdot_minus, xdot_plus, time_tangent)
}

/// Apply a merged pulse: the per-spike jump terms summed.
#[inline]
pub fn apply_jump_pulse<S: Scalar>(x: S, pulse: &Pulse, tau: f64) -> S {
    if S::TRACKS_TANGENT {
        x + S::from_parts(pulse.weight.primal, pulse.weight.tangent + pulse.weighted_time_tangent / tau)
    } else {
        x + S::constant(pulse.weight.primal)
    }
}

pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Surrogate derivative of [`heaviside`].
pub fn superspike_grad(x: f64) -> f64 {
    let d = x.abs() + 1.0;
    1.0 / (d * d)
}
