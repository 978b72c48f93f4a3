//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are reported as FAIL but do not fail the
//! binary; every other FAIL exits with status 1.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use eventq::bench::{
    default_capacity, measure_drop_rate, rsnn_params_for, run_inference_suite, PoissonWorkload, RsnnMode, Timing,
};
use eventq::network::{grad_fd_oracle, simulate, DriveParams, Network, NetworkParams, SeedDirection};
use eventq::neuro::ContinuousDelayLine;
use eventq::queue::{lockstep_equivalence, Equivalence, TraceSpec};
use eventq::{make_queue, Capability, Dual, Error, EventQueue, QueueConfig, QueueKind, SpikeEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const KNOWN_RED: &[&str] = &["drop_rate_fiforing4"];

// oracle equivalence
const TRACES: u64 = 1000;
const TRACE_EVENTS: usize = 100_000;
const ORACLE_BUDGET_S: f64 = 60.0;

// analytic delay gradient
const ANALYTIC_REL_TOL: f64 = 1e-9;

// recurrent network
const RSNN_N: usize = 10;
const RSNN_STEPS: u64 = 2000;
const RSNN_DT: f64 = 1e-3;
const RSNN_DIRECTIONS: usize = 20;
const FD_EPS: f64 = 1e-6;
const FD_REL_TOL: f64 = 5e-2;
const FD_ABS_FLOOR: f64 = 1e-6;
const REFERENCE_REFINE: u64 = 32;

// drop rates
const DROP_STEPS: u64 = 1_000_000;
const DROP_SEED: u64 = 42;
const FIFO_MAX_DROP: f64 = 1e-3;
const MC_SEED: u64 = 0x00dd_5eed;

// scaling
const CAPACITIES: [usize; 5] = [4, 8, 16, 32, 64];
const SORTED_MIN_RATIO: f64 = 1.5;
const RING_MAX_RATIO: f64 = 2.0;
// many short runs: longer ones pick up more host noise
const PAIRED_ROUNDS: usize = 41;
const PAIRED_WARMUP: usize = 5;
const RSNN_TIMED_STEPS: u64 = 10_000;

// delay line
const DELAY_LINE_REL_TOL: f64 = 1e-3;

struct Report {
    lines: Vec<(String, bool, String)>,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((name.to_string(), pass, detail));
    }

    fn error(&mut self, name: &str, e: Error) {
        self.check(name, false, format!("error: {e}"));
    }
}

fn dense(d: u64) -> QueueConfig {
    QueueConfig::new(QueueKind::DenseOracle, 0, d)
}

fn family_hetero(seed: u64) -> eventq::Result<Vec<Equivalence>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_delay = rng.random_range(2..=64u64);
    let cap = rng.random_range((max_delay as usize / 2).max(8)..=64usize);
    let mut spec = TraceSpec::heterogeneous(TRACE_EVENTS, max_delay, seed);
    spec.rate = rng.random_range(1.0..4.0);
    spec.max_in_flight = Some(cap);
    let candidates = [
        QueueConfig::new(QueueKind::Ring, max_delay as usize, max_delay),
        QueueConfig::new(QueueKind::SortedArray, cap, max_delay),
        QueueConfig::new(QueueKind::BinaryHeap, cap, max_delay),
    ];
    lockstep_equivalence(&spec, &dense(max_delay), &candidates, true)
}

fn family_fifo(seed: u64) -> eventq::Result<Vec<Equivalence>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = rng.random_range(1..=16usize);
    let d = rng.random_range(1..=2 * cap as u64);
    let mut spec = TraceSpec::homogeneous(TRACE_EVENTS, d, seed);
    spec.rate = rng.random_range(1.0..4.0);
    spec.max_in_flight = Some(cap);
    lockstep_equivalence(&spec, &dense(d), &[QueueConfig::new(QueueKind::FifoRing, cap, d)], true)
}

fn family_single(seed: u64) -> eventq::Result<Vec<Equivalence>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=64u64);
    let mut spec = TraceSpec::homogeneous(TRACE_EVENTS, d, seed);
    spec.rate = rng.random_range(1.0..4.0);
    spec.distinct_delivery = true;
    let reference = QueueConfig::new(QueueKind::FifoRing, 1, d);
    let single = QueueConfig::new(QueueKind::SingleSpikeHold, 1, d);
    lockstep_equivalence(&spec, &reference, &[single], false)
}

fn family_bits(seed: u64) -> eventq::Result<Vec<Equivalence>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=31u64);
    let mut spec = TraceSpec::homogeneous(TRACE_EVENTS, d, seed);
    spec.rate = rng.random_range(1.0..4.0);
    spec.distinct_delivery = true;
    spec.unit_weights = true;
    spec.gradients = false;
    lockstep_equivalence(&spec, &dense(d), &[QueueConfig::new(QueueKind::BitArray32, 32, d)], true)
}

fn oracle_equivalence(r: &mut Report) {
    type Family = fn(u64) -> eventq::Result<Vec<Equivalence>>;
    let families: [(&str, Family, u64); 4] = [
        ("ring/sortedarray/binaryheap", family_hetero, 0),
        ("fiforing", family_fifo, 1 << 32),
        ("singlespikehold", family_single, 2 << 32),
        ("bitarray32", family_bits, 3 << 32),
    ];
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut per_family = Vec::new();
    for (name, f, offset) in families {
        let t = Instant::now();
        let bad: Vec<String> = (0..TRACES)
            .into_par_iter()
            .filter_map(|s| match f(offset + s) {
                Ok(v) if v.iter().all(Equivalence::is_equal) => None,
                Ok(v) => Some(format!("{name} seed {}: {v:?}", offset + s)),
                Err(e) => Some(format!("{name} seed {}: {e}", offset + s)),
            })
            .collect();
        failures.extend(bad);
        per_family.push(format!("{name} {:.1} s", t.elapsed().as_secs_f64()));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "{} families x {TRACES} traces x {TRACE_EVENTS} events, {} divergent, {secs:.1} s (budget {ORACLE_BUDGET_S} s)",
        families.len(),
        failures.len()
    );
    println!("    {}", per_family.join(", "));
    for f in failures.iter().take(3) {
        println!("    {f}");
    }
    r.check("oracle_equivalence", failures.is_empty() && secs < ORACLE_BUDGET_S, detail);
}

/// Two neurons, one unit edge `0 -> 1`, no drive; neuron 0 is forced to spike.
fn two_neuron(kind: QueueKind, d: f64, tau_syn: f64, dt: f64) -> NetworkParams {
    NetworkParams {
        n: 2,
        weights: vec![0.0, 1.0, 0.0, 0.0],
        delays: vec![0.0, d, d, 0.0],
        bias: vec![0.0, 0.0],
        target: vec![0.0, 0.0],
        tau_m: 1.0,
        tau_syn,
        v_th: 1.0,
        v_reset: 0.0,
        refractory_steps: 0,
        dt,
        queue: kind,
        capacity: None,
        drive: DriveParams { rate: 0.0, amplitude: 0.0, seed: 0 },
    }
}

fn analytic_delay_gradient(r: &mut Report) {
    let dt = 1e-3;
    let tau = 0.05;
    let spike_step = 10u64;
    let end_step = 400u64;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for kind in [QueueKind::Ring, QueueKind::SortedArray, QueueKind::BinaryHeap, QueueKind::DenseOracle] {
        for d in [0.0021, 0.0137, 0.05, 0.12345] {
            let p = two_neuron(kind, d, tau, dt);
            let run = || -> eventq::Result<f64> {
                let mut net =
                    Network::<Dual>::build(&p, SeedDirection::Delay { pre: 0, post: 1 }, end_step as f64 * dt)?;
                net.run(spike_step - 1)?;
                net.force_spike(0)?;
                net.run(end_step - spike_step + 1)?;
                Ok(net.synaptic_currents()[1].tangent)
            };
            let got = match run() {
                Ok(g) => g,
                Err(e) => return r.error("analytic_delay_gradient", e),
            };
            let t_post = spike_step as f64 * dt + d;
            let t_end = end_step as f64 * dt;
            let want = (1.0 / tau) * (-(t_end - t_post) / tau).exp();
            worst = worst.max((got - want).abs() / want.abs());
            cases += 1;
        }
    }
    r.check(
        "analytic_delay_gradient",
        worst <= ANALYTIC_REL_TOL,
        format!("{cases} cases, worst relative error {worst:.2e} (tol {ANALYTIC_REL_TOL:e}), sign +"),
    );
}

fn rsnn_params() -> eventq::Result<NetworkParams> {
    NetworkParams::random(RSNN_N, RSNN_DT, QueueKind::Ring, 42)
}

fn random_directions(seed: u64, count: usize) -> impl Iterator<Item = SeedDirection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(move |_| {
        let pre = rng.random_range(0..RSNN_N);
        let post = (pre + rng.random_range(1..RSNN_N)) % RSNN_N;
        if rng.random_bool(0.5) {
            SeedDirection::Weight { pre, post }
        } else {
            SeedDirection::Delay { pre, post }
        }
    })
}

fn rsnn_gradient(r: &mut Report) {
    let params = match rsnn_params() {
        Ok(p) => p,
        Err(e) => return r.error("rsnn_gradient_fd", e),
    };
    let mut accepted = Vec::new();
    let mut rejected = 0;
    let mut worst: f64 = 0.0;
    for dir in random_directions(7, 400) {
        if accepted.len() == RSNN_DIRECTIONS {
            break;
        }
        let fd = match grad_fd_oracle(&params, dir, RSNN_STEPS, FD_EPS) {
            Ok(g) => g,
            Err(Error::NonSmooth { .. }) => {
                rejected += 1;
                continue;
            }
            Err(e) => return r.error("rsnn_gradient_fd", e),
        };
        let ad = match simulate(&params, dir, RSNN_STEPS) {
            Ok(o) => o.loss.tangent,
            Err(e) => return r.error("rsnn_gradient_fd", e),
        };
        worst = worst.max((ad - fd).abs() / fd.abs().max(FD_ABS_FLOOR));
        accepted.push(dir);
    }
    r.check(
        "rsnn_gradient_fd",
        accepted.len() == RSNN_DIRECTIONS && worst < FD_REL_TOL,
        format!(
            "{} smooth directions ({rejected} rejected), worst relative error {worst:.2e} (tol {FD_REL_TOL:e})",
            accepted.len()
        ),
    );

    // discretisation error against a fine-grid reference at fixed duration
    let grad_at = |refine: u64| -> eventq::Result<Vec<f64>> {
        let p = params.clone().with_dt(RSNN_DT / refine as f64);
        accepted.iter().map(|&dir| Ok(simulate(&p, dir, RSNN_STEPS * refine)?.loss.tangent)).collect()
    };
    let result = (|| -> eventq::Result<(f64, f64)> {
        let reference = grad_at(REFERENCE_REFINE)?;
        let norm = reference.iter().map(|g| g * g).sum::<f64>().sqrt();
        let err = |g: Vec<f64>| g.iter().zip(&reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / norm;
        Ok((err(grad_at(1)?), err(grad_at(2)?)))
    })();
    match result {
        Ok((coarse, fine)) => r.check(
            "rsnn_gradient_dt_halving",
            fine < coarse,
            format!("aggregate relative error vs dt/{REFERENCE_REFINE}: {coarse:.3e} at dt, {fine:.3e} at dt/2"),
        ),
        Err(e) => r.error("rsnn_gradient_dt_halving", e),
    }
}

/// Independent model of a one-slot queue that keeps its stored spike: a spike
/// sent at step `s` blocks new spikes at steps `s + 1 ..= s + d - 1`.
fn single_spike_hold_mc(lambda: f64, d: u64, steps: u64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = 1.0 / lambda;
    let (mut offered, mut lost) = (0u64, 0u64);
    let mut busy_until: Option<u64> = None;
    for s in 0..steps {
        if !rng.random_bool(p) {
            continue;
        }
        offered += 1;
        if busy_until.is_some_and(|b| s <= b) {
            lost += 1;
        } else {
            busy_until = Some(s + d - 1);
        }
    }
    let rate = lost as f64 / offered as f64;
    (rate, (rate * (1.0 - rate) / offered as f64).sqrt())
}

/// Probability that at least `k` of the other spikes in a window of `w`
/// steps are in flight, for Bernoulli arrivals with probability `p`.
fn binomial_tail(w: u64, p: f64, k: u64) -> f64 {
    let mut term = (1.0 - p).powf(w as f64);
    let mut below = 0.0;
    for i in 0..k {
        below += term;
        term *= (w - i) as f64 / (i + 1) as f64 * p / (1.0 - p);
    }
    1.0 - below
}

fn drop_rates(r: &mut Report) {
    let lambda = 400.0;
    let d = 80;
    let run = |kind: QueueKind, cap: usize, d: u64| {
        measure_drop_rate(&QueueConfig::new(kind, cap, d), lambda, d, DROP_STEPS, DROP_SEED)
    };

    match run(QueueKind::DoNothing, 0, d) {
        Ok(m) => r.check("drop_rate_donothing", m.rate == 1.0, format!("{} of {} lost", m.lost, m.offered)),
        Err(e) => r.error("drop_rate_donothing", e),
    }
    match run(QueueKind::Ring, d as usize, d) {
        Ok(m) => r.check("drop_rate_ring", m.rate == 0.0 && m.offered > 0, format!("{} of {} lost", m.lost, m.offered)),
        Err(e) => r.error("drop_rate_ring", e),
    }
    // pressure d / lambda = 0.5
    let fifo_d = 200;
    match run(QueueKind::FifoRing, 4, fifo_d) {
        Ok(m) => {
            let expected = binomial_tail(fifo_d - 1, 1.0 / lambda, 4);
            r.check(
                "drop_rate_fiforing4",
                m.rate < FIFO_MAX_DROP,
                format!(
                    "rate {:.3e} +- {:.1e} over {} spikes (limit {FIFO_MAX_DROP:e}; arrival-model expectation {expected:.2e})",
                    m.rate, m.std_err, m.offered
                ),
            )
        }
        Err(e) => r.error("drop_rate_fiforing4", e),
    }
    match run(QueueKind::SingleSpikeHold, 1, d) {
        Ok(m) => {
            let (mc, mc_se) = single_spike_hold_mc(lambda, d, DROP_STEPS, MC_SEED);
            let se = (m.std_err * m.std_err + mc_se * mc_se).sqrt();
            r.check(
                "drop_rate_singlespikehold",
                (m.rate - mc).abs() <= 2.0 * se,
                format!(
                    "queue {:.4} vs monte carlo {mc:.4}, |diff| {:.4} <= 2 se {:.4}",
                    m.rate,
                    (m.rate - mc).abs(),
                    2.0 * se
                ),
            )
        }
        Err(e) => r.error("drop_rate_singlespikehold", e),
    }
}

fn constructible(kind: QueueKind, cap: usize, d: u64) -> Option<QueueConfig> {
    make_queue(kind, cap, d).ok().map(|_| QueueConfig::new(kind, cap, d))
}

fn ns(rec: &eventq::bench::BenchRecord) -> f64 {
    rec.ns_per_step_per_queue.unwrap_or(f64::NAN)
}

/// DoNothing at or below every other row of each workload.
fn donothing_lowest(
    rows: &[eventq::bench::BenchRecord],
    key: impl Fn(&eventq::bench::BenchRecord) -> String,
) -> (bool, Vec<String>) {
    let mut groups: BTreeMap<String, Vec<&eventq::bench::BenchRecord>> = BTreeMap::new();
    for row in rows {
        groups.entry(key(row)).or_default().push(row);
    }
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, group) in groups {
        let Some(base) = group.iter().find(|x| x.kind == QueueKind::DoNothing) else {
            ok = false;
            notes.push(format!("{name}: no donothing row"));
            continue;
        };
        let (fastest, t) = group
            .iter()
            .filter(|x| x.kind != QueueKind::DoNothing)
            .map(|x| (x.kind, ns(x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("other kinds present");
        let good = ns(base) <= t;
        ok &= good;
        notes.push(format!("{name}: donothing {:.2} vs {fastest} {t:.2}{}", ns(base), if good { "" } else { " !" }));
    }
    (ok, notes)
}

fn scaling(r: &mut Report) {
    // poisson workloads
    let poisson = [
        PoissonWorkload { lambda_steps: 400.0, delay_steps: 80, n_queues: 1, steps: 2_000_000, seed: 42 },
        PoissonWorkload { lambda_steps: 400.0, delay_steps: 80, n_queues: 1000, steps: 2000, seed: 42 },
        PoissonWorkload { lambda_steps: 400.0, delay_steps: 80, n_queues: 10_000, steps: 200, seed: 42 },
    ];
    let mut cases = Vec::new();
    for w in poisson {
        for kind in QueueKind::IMPLEMENTED {
            if let Some(cfg) = constructible(kind, default_capacity(kind, w.delay_steps), w.delay_steps) {
                cases.push((cfg, w));
            }
        }
    }
    let poisson_rows = match run_inference_suite(&cases, Timing { reps: 21, warmup: 5 }) {
        Ok(rows) => rows,
        Err(e) => return r.error("scaling_donothing_lowest", e),
    };

    // capacity sweep
    let cap_w = PoissonWorkload { lambda_steps: 1.0, delay_steps: 4, n_queues: 100, steps: 10_000, seed: 42 };
    let mut cases = Vec::new();
    for cap in CAPACITIES {
        for kind in [QueueKind::DoNothing, QueueKind::Ring, QueueKind::SortedArray] {
            cases.push((QueueConfig::new(kind, cap, cap_w.delay_steps), cap_w));
        }
    }
    let cap_rows = match run_inference_suite(&cases, Timing { reps: 9, warmup: 3 }) {
        Ok(rows) => rows,
        Err(e) => return r.error("scaling_capacity", e),
    };
    let series = |kind: QueueKind| -> Vec<f64> { cap_rows.iter().filter(|x| x.kind == kind).map(ns).collect() };
    let sorted = series(QueueKind::SortedArray);
    let ring = series(QueueKind::Ring);
    let sorted_ratio = sorted[4] / sorted[0];
    let ring_ratio = ring[4] / ring[0];
    let monotone = sorted.windows(2).all(|w| w[1] >= w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join(" ");
    r.check(
        "scaling_sortedarray_capacity",
        monotone && sorted_ratio > SORTED_MIN_RATIO,
        format!(
            "ns/step [{}] over capacities {CAPACITIES:?}, ratio 64/4 {sorted_ratio:.2} (> {SORTED_MIN_RATIO})",
            fmt(&sorted)
        ),
    );
    r.check(
        "scaling_ring_capacity",
        ring_ratio < RING_MAX_RATIO,
        format!("ns/step [{}], ratio 64/4 {ring_ratio:.2} (< {RING_MAX_RATIO})", fmt(&ring)),
    );

    let (ok_p, notes_p) = donothing_lowest(&poisson_rows, |x| format!("{} batch {}", x.workload, x.batch));
    let (ok_c, notes_c) = donothing_lowest(&cap_rows, |x| format!("capacity {}", x.capacity));
    let (ok_r, notes_r) = match rsnn_donothing_lowest() {
        Ok(x) => x,
        Err(e) => return r.error("scaling_donothing_lowest", e),
    };
    for n in notes_p.iter().chain(&notes_c).chain(&notes_r) {
        println!("    {n}");
    }
    let groups = notes_p.len() + notes_c.len() + notes_r.len();
    let bad = notes_p.iter().chain(&notes_c).chain(&notes_r).filter(|n| n.ends_with('!')).count();
    r.check(
        "scaling_donothing_lowest",
        ok_p && ok_c && ok_r,
        format!("{groups} workloads, donothing above the fastest kind in {bad}"),
    );

    forward_slower_than_inference(r);
}

fn time_run<S: eventq::Scalar>(p: &NetworkParams, seed: SeedDirection, steps: u64) -> eventq::Result<f64> {
    let mut net = Network::<S>::build(p, seed, eventq::network::duration(p, steps))?;
    let start = Instant::now();
    net.run(steps)?;
    Ok(start.elapsed().as_nanos() as f64)
}

fn time_mode(p: &NetworkParams, mode: RsnnMode, steps: u64) -> eventq::Result<f64> {
    match mode {
        RsnnMode::Inference => time_run::<f64>(p, SeedDirection::None, steps),
        RsnnMode::ForwardAd => time_run::<Dual>(p, SeedDirection::Weight { pre: 0, post: 1 }, steps),
    }
}

/// Time `a` and `b` back to back in alternating order; median of `b / a`.
fn paired_ratio(a: &dyn Fn() -> eventq::Result<f64>, b: &dyn Fn() -> eventq::Result<f64>) -> eventq::Result<f64> {
    for _ in 0..PAIRED_WARMUP {
        a()?;
        b()?;
    }
    let mut ratios = Vec::with_capacity(PAIRED_ROUNDS);
    for i in 0..PAIRED_ROUNDS {
        let (ta, tb) = if i % 2 == 0 {
            let ta = a()?;
            (ta, b()?)
        } else {
            let tb = b()?;
            (a()?, tb)
        };
        ratios.push(tb / ta);
    }
    ratios.sort_by(f64::total_cmp);
    Ok(ratios[ratios.len() / 2])
}

/// Paired ratio of every kind against DoNothing on the recurrent network.
fn rsnn_donothing_lowest() -> eventq::Result<(bool, Vec<String>)> {
    let base = rsnn_params_for(QueueKind::DoNothing, RSNN_N, RSNN_DT, 42)?;
    let mut ok = true;
    let mut notes = Vec::new();
    for mode in [RsnnMode::Inference, RsnnMode::ForwardAd] {
        let mut slowest_ratio = f64::INFINITY;
        let mut closest = QueueKind::DoNothing;
        for kind in QueueKind::IMPLEMENTED {
            if kind == QueueKind::DoNothing || (kind == QueueKind::BitArray32 && mode == RsnnMode::ForwardAd) {
                continue;
            }
            let p = rsnn_params_for(kind, RSNN_N, RSNN_DT, 42)?;
            let ratio =
                paired_ratio(&|| time_mode(&base, mode, RSNN_TIMED_STEPS), &|| time_mode(&p, mode, RSNN_TIMED_STEPS))?;
            if ratio < slowest_ratio {
                slowest_ratio = ratio;
                closest = kind;
            }
        }
        let good = slowest_ratio >= 1.0;
        ok &= good;
        notes.push(format!(
            "rsnn_{}: smallest paired {closest}/donothing ratio {slowest_ratio:.3}{}",
            mode.name(),
            if good { "" } else { " !" }
        ));
    }
    Ok((ok, notes))
}

fn forward_slower_than_inference(r: &mut Report) {
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in QueueKind::IMPLEMENTED {
        let Ok(q) = make_queue(kind, 64, 32) else { continue };
        if !q.capabilities().supports_gradients {
            continue;
        }
        let ratio = match rsnn_params_for(kind, RSNN_N, RSNN_DT, 42).and_then(|p| {
            paired_ratio(&|| time_mode(&p, RsnnMode::Inference, RSNN_TIMED_STEPS), &|| {
                time_mode(&p, RsnnMode::ForwardAd, RSNN_TIMED_STEPS)
            })
        }) {
            Ok(x) => x,
            Err(e) => return r.error("scaling_forward_slower", e),
        };
        ok &= ratio > 1.0;
        parts.push(format!("{kind} {ratio:.3}"));
    }
    r.check("scaling_forward_slower", ok, format!("median paired forward/inference ratio: {}", parts.join(", ")));
}

fn unsupported(res: eventq::Result<impl Sized>, kind: QueueKind, want: Capability) -> bool {
    matches!(res, Err(Error::Unsupported { kind: k, capability, .. }) if k == kind && capability == want)
}

fn capability_matrix(r: &mut Report) {
    let mut checks: Vec<(&str, bool)> = Vec::new();
    for kind in [QueueKind::FifoRing, QueueKind::BitArray32] {
        let ok = make_queue(kind, 4, 8).is_ok_and(|mut q| {
            q.enqueue(SpikeEvent::unit(3)).is_ok()
                && unsupported(q.enqueue(SpikeEvent::unit(5)), kind, Capability::HeterogeneousDelay)
        });
        let net = NetworkParams::random(4, 1e-3, kind, 1)
            .and_then(|p| Network::<f64>::build(&p, SeedDirection::None, 1.0).map(|_| ()));
        checks.push((
            if kind == QueueKind::FifoRing { "fiforing heterogeneous" } else { "bitarray32 heterogeneous" },
            ok && unsupported(net, kind, Capability::HeterogeneousDelay),
        ));
    }
    let grad_enqueue = make_queue(QueueKind::BitArray32, 32, 8).is_ok_and(|mut q| {
        unsupported(
            q.enqueue(SpikeEvent::new(3, Dual::new(1.0, 0.5), 0.0)),
            QueueKind::BitArray32,
            Capability::Gradients,
        )
    });
    let grad_net = rsnn_params_for(QueueKind::BitArray32, 4, 1e-3, 1)
        .and_then(|p| Network::<Dual>::build(&p, SeedDirection::Weight { pre: 0, post: 1 }, 1.0).map(|_| ()));
    checks.push((
        "bitarray32 gradients",
        grad_enqueue && unsupported(grad_net, QueueKind::BitArray32, Capability::Gradients),
    ));
    checks.push((
        "bitarray32 delay > 32",
        unsupported(make_queue(QueueKind::BitArray32, 32, 33), QueueKind::BitArray32, Capability::DelayHorizon(32)),
    ));
    checks.push(("bgpq", unsupported(make_queue(QueueKind::Bgpq, 8, 8), QueueKind::Bgpq, Capability::Implementation)));
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    r.check(
        "capability_matrix",
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} unsupported pairs rejected with named errors", checks.len())
        } else {
            format!("not rejected: {}", failed.join(", "))
        },
    );
}

fn delay_line(r: &mut Report) {
    let dt = 1e-3;
    let d = 0.0372;
    let (a, b) = (0.7, 0.2);
    let ramp = |t: f64| a * t + b;
    let mut line = match ContinuousDelayLine::new(Dual::new(d, 1.0), dt) {
        Ok(l) => l,
        Err(e) => return r.error("delay_line_ramp", e),
    };
    let warmup = line.lag() + 2;
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..2000 {
        let t = k as f64 * dt;
        let y = line.step(Dual::constant(ramp(t)));
        if k < warmup {
            continue;
        }
        let delay = line.lag() as f64 * dt;
        let fd = (ramp(t - delay - eps) - ramp(t - delay + eps)) / (2.0 * eps);
        worst = worst.max((y.tangent - fd).abs() / fd.abs());
    }
    r.check(
        "delay_line_ramp",
        worst <= DELAY_LINE_REL_TOL,
        format!("worst relative error {worst:.2e} after {warmup} warm-up steps (tol {DELAY_LINE_REL_TOL:e})"),
    );
}

fn main() -> ExitCode {
    let mut r = Report { lines: Vec::new() };
    oracle_equivalence(&mut r);
    analytic_delay_gradient(&mut r);
    rsnn_gradient(&mut r);
    drop_rates(&mut r);
    scaling(&mut r);
    capability_matrix(&mut r);
    delay_line(&mut r);

    let failed: Vec<&str> = r.lines.iter().filter(|l| !l.1).map(|l| l.0.as_str()).collect();
    let unexpected: Vec<&str> = failed.iter().copied().filter(|n| !KNOWN_RED.contains(n)).collect();
    println!(
        "acceptance: {} passed, {} failed ({} known red: {})",
        r.lines.len() - failed.len(),
        failed.len(),
        failed.len() - unexpected.len(),
        KNOWN_RED.join(", ")
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
