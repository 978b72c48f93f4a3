use eventq::grad::{
    apply_jump, apply_jump_pulse, compose_delay, detect_crossing, state_jump, superspike_grad, SynapseJump,
};
use eventq::neuro::{ContinuousDelayLine, FirstOrderSynapse, LifNeuron};
use eventq::{Dual, Error, Pulse, SpikeEvent};
use proptest::prelude::*;

fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

proptest! {
    #[test]
    fn dual_chain_matches_fd(x in -2.0f64..2.0, a in -1.5f64..1.5) {
        let f = |x: Dual| (x.scale(a)).exp() * x + x * x - Dual::constant(3.0) * x;
        let got = f(Dual::seeded(x)).tangent;
        let want = fd(|x| f(Dual::constant(x)).primal, x, 1e-6);
        prop_assert!((got - want).abs() <= 1e-6 * (1.0 + want.abs()), "{got} vs {want}");
    }

    #[test]
    fn crossing_time_tangent_matches_fd(vp in -0.5f64..0.9, rise in 0.2f64..2.0, dvp in -1.0f64..1.0, dvc in -1.0f64..1.0) {
        // both samples move linearly with theta
        let dt = 0.01;
        let t_of = |theta: f64| {
            let c = detect_crossing(vp + dvp * theta, vp + rise + dvc * theta, 1.0, 7, dt).unwrap();
            c.map(|c| c.t_spk)
        };
        prop_assume!(vp + rise > 1.0 + 1e-3);
        let c = detect_crossing(Dual::new(vp, dvp), Dual::new(vp + rise, dvc), 1.0, 7, dt).unwrap().unwrap();
        let want = fd(|th| t_of(th).unwrap(), 0.0, 1e-7);
        prop_assert!((c.dt_dtheta - want).abs() <= 1e-5 * (1.0 + want.abs()), "{} vs {want}", c.dt_dtheta);
    }

    #[test]
    fn jump_moves_state_by_shift_of_arrival(x0 in -2.0f64..2.0, w in -2.0f64..2.0, tau in 0.05f64..2.0, tt in -1.0f64..1.0) {
        // state just after the arrival, seen at a fixed time later
        let gap = 0.3;
        let after = |shift: f64| {
            let mut x = x0;
            // arrival at 0.1 + shift, observed at 0.1 + gap
            x *= (-(0.1 + shift) / tau).exp();
            x += w;
            x * (-(gap - shift) / tau).exp()
        };
        let x_minus = Dual::constant(x0 * (-0.1f64 / tau).exp());
        let jumped = apply_jump(x_minus, &SynapseJump::new(tau, Dual::constant(w)).unwrap(), tt);
        let got = jumped.tangent * (-gap / tau).exp();
        let want = tt * fd(after, 0.0, 1e-7);
        prop_assert!((got - want).abs() <= 1e-6 * (1.0 + want.abs()), "{got} vs {want}");
    }
}

#[test]
fn jump_term_sign_is_plus_w_over_tau() {
    let j = SynapseJump::new(0.5, Dual::constant(2.0)).unwrap();
    let x = apply_jump(Dual::constant(0.3), &j, 1.0);
    assert_eq!(x.primal, 2.3);
    assert!((x.tangent - 2.0 / 0.5).abs() < 1e-15);
    let later = apply_jump(Dual::constant(0.3), &j, -1.0);
    assert!((later.tangent + 4.0).abs() < 1e-15);
}

#[test]
fn state_jump_general_form() {
    // no slope change means no time term
    let x = state_jump(Dual::new(1.0, 0.2), Dual::new(0.5, 0.1), 3.0, 3.0, 9.0);
    assert_eq!(x, Dual::new(1.5, 0.30000000000000004));
    let y = state_jump(Dual::ZERO, Dual::ZERO, 1.0, -1.0, 0.5);
    assert_eq!(y.tangent, 1.0);
}

#[test]
fn pulse_jump_equals_event_jump() {
    let ev = SpikeEvent::new(4, Dual::new(0.7, 0.2), -0.4);
    let tau = 0.25;
    let via_pulse = apply_jump_pulse(Dual::new(0.1, 0.05), &Pulse::from_event(&ev), tau);
    let via_event = apply_jump(Dual::new(0.1, 0.05), &SynapseJump::new(tau, ev.weight).unwrap(), ev.time_tangent);
    assert!((via_pulse.primal - via_event.primal).abs() < 1e-15);
    assert!((via_pulse.tangent - via_event.tangent).abs() < 1e-15);
    assert_eq!(apply_jump_pulse(0.1f64, &Pulse::from_event(&ev), tau), 0.1 + 0.7);
}

#[test]
fn delay_composes_with_spike_time() {
    let c = detect_crossing(Dual::new(0.5, 1.0), Dual::new(1.5, 0.0), 1.0, 3, 0.1).unwrap().unwrap();
    let (t, tt) = compose_delay(&c, Dual::seeded(0.02));
    assert!((t - (c.t_spk + 0.02)).abs() < 1e-15);
    assert!((tt - (c.dt_dtheta + 1.0)).abs() < 1e-15);
}

#[test]
fn grazing_crossing_is_refused() {
    let err = detect_crossing(Dual::constant(1.0 - 1e-14), Dual::constant(1.0), 1.0, 5, 0.1).unwrap_err();
    assert!(matches!(err, Error::GrazingCrossing { step: 5, .. }));
}

#[test]
fn synapse_current_after_one_spike() {
    let (tau, dt, lag) = (0.2, 0.01, 0.004);
    let mut s = FirstOrderSynapse::<Dual>::new(tau, dt).unwrap();
    let w: f64 = (-lag / tau).exp();
    s.step(&Pulse::from_event(&SpikeEvent::new(1, Dual::constant(w), 1.0)));
    for _ in 0..30 {
        s.step(&Pulse::ZERO);
    }
    let elapsed = lag + 30.0 * dt;
    let want = (-elapsed / tau).exp();
    assert!((s.i_syn.primal - want).abs() < 1e-14);
    assert!((s.i_syn.tangent - want / tau).abs() < 1e-12);
}

#[test]
fn reset_relax_tangent_matches_fd() {
    // a constant-input neuron crossing inside a step; input carries the seed
    let dt = 0.05;
    let run = |i: Dual| {
        let mut n = LifNeuron::<Dual>::new(1.0, 1.0, 0.0, 0, dt).unwrap();
        let mut spikes = 0;
        for k in 1..=40 {
            if n.step(i, k).unwrap().is_some() {
                spikes += 1;
            }
        }
        (n.v, spikes)
    };
    let (v, spikes) = run(Dual::seeded(1.6));
    let (vp, sp) = run(Dual::constant(1.6 + 1e-7));
    let (vm, sm) = run(Dual::constant(1.6 - 1e-7));
    assert!(spikes > 0 && sp == spikes && sm == spikes);
    let want = (vp.primal - vm.primal) / 2e-7;
    assert!((v.tangent - want).abs() < 1e-4 * (1.0 + want.abs()), "{} vs {want}", v.tangent);
}

#[test]
fn delay_line_tangent_on_smooth_input() {
    let dt = 1e-3;
    let mut line = ContinuousDelayLine::new(Dual::seeded(0.02), dt).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let t = k as f64 * dt;
        let y = line.step(Dual::constant(t.sin()));
        if k > line.lag() + 2 {
            let want = -(t - line.lag() as f64 * dt).cos();
            worst = worst.max((y.tangent - want).abs());
        }
    }
    // one-sided slope: first-order in dt
    assert!(worst < 2.0 * dt, "{worst}");
}

#[test]
fn surrogate_peaks_at_threshold() {
    assert_eq!(superspike_grad(0.0), 1.0);
    assert!(superspike_grad(0.5) < 1.0);
    assert_eq!(superspike_grad(-0.5), superspike_grad(0.5));
}
