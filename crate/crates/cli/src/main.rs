// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eventq::bench::{
    default_capacity, platform_label, rsnn_params_for, run_inference_suite, run_rsnn_suite, sweep, write_csv,
    write_json, BenchRecord, PoissonWorkload, RsnnMode, SweepAxis, SweepBase, Timing,
};
use eventq::network::{grad_fd_oracle, simulate, DriveParams, Network, NetworkParams, SeedDirection};
use eventq::queue::{lockstep_equivalence, Equivalence, TraceSpec};
use eventq::{make_queue, Dual, Error, EventQueue, QueueConfig, QueueKind};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(name = "eventq", version, about = "Spike event queue benchmarks and checks")]
struct Cli {
    /// Seed for workloads, networks and traces.
    #[arg(long, global = true, env = "EVENTQ_SEED", default_value_t = eventq::bench::DEFAULT_SEED)]
    seed: u64,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Timed benchmarks.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Drop rate over a pressure grid (delay / lambda).
    Droprate(DroprateArgs),
    /// Forward-mode gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Randomized equivalence against the dense oracle.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Independent queues fed by Poisson spike trains.
    Poisson(PoissonArgs),
    /// Recurrent LIF network.
    Rsnn(RsnnArgs),
    /// Poisson benchmark over a grid of one parameter.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to json for `.json` paths, csv otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct TimingArgs {
    #[arg(long, default_value_t = 5)]
    reps: u32,
    #[arg(long, default_value_t = 2)]
    warmup: u32,
}

impl TimingArgs {
    fn timing(&self) -> Timing {
        Timing { reps: self.reps, warmup: self.warmup }
    }
}

#[derive(Args)]
struct WorkloadArgs {
    /// Mean inter-spike interval in steps.
    #[arg(long, default_value_t = 400.0)]
    lambda: f64,
    /// Delay in steps.
    #[arg(long, default_value_t = 80)]
    delay: u64,
    /// Number of independent queues.
    #[arg(long, default_value_t = 1000)]
    batch: usize,
    #[arg(long, default_value_t = 100_000)]
    steps: u64,
}

#[derive(Args)]
struct PoissonArgs {
    /// Queue kinds, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "ring")]
    queue: Vec<QueueKind>,
    /// Defaults to a per-kind value.
    #[arg(long)]
    capacity: Option<usize>,
    #[command(flatten)]
    workload: WorkloadArgs,
    #[command(flatten)]
    timing: TimingArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Inference,
    ForwardAd,
}

#[derive(Args)]
struct RsnnArgs {
    #[arg(long, value_delimiter = ',', default_value = "ring")]
    queue: Vec<QueueKind>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, value_enum, default_value_t = Mode::Inference)]
    mode: Mode,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 10_000)]
    steps: u64,
    #[command(flatten)]
    timing: TimingArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    Batch,
    Capacity,
    Pressure,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: Axis,
    /// Grid values, ascending, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "donothing,ring,sortedarray,binaryheap")]
    queue: Vec<QueueKind>,
    #[arg(long)]
    capacity: Option<usize>,
    #[command(flatten)]
    workload: WorkloadArgs,
    #[command(flatten)]
    timing: TimingArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DroprateArgs {
    #[arg(long, value_delimiter = ',', default_value = "fiforing")]
    queue: Vec<QueueKind>,
    /// Capacities to try; defaults to a per-kind value.
    #[arg(long, value_delimiter = ',')]
    capacity: Vec<usize>,
    /// Delay over lambda, ascending.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,1,2,4")]
    pressure: Vec<f64>,
    #[arg(long, default_value_t = 400.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1_000_000)]
    steps: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value = "ring")]
    queue: QueueKind,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 2000)]
    steps: u64,
    /// Smooth directions to check.
    #[arg(long, default_value_t = 20)]
    directions: usize,
    /// Candidate directions drawn before giving up.
    #[arg(long, default_value_t = 400)]
    max_draws: usize,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Relative tolerance against the finite difference.
    #[arg(long, default_value_t = 5e-2)]
    tol: f64,
    /// Finite differences smaller than this are compared absolutely.
    #[arg(long, default_value_t = 1e-6)]
    abs_floor: f64,
    /// Turn off external drive and bias so no neuron fires.
    #[arg(long)]
    quiescent: bool,
    /// Check one forced spike through a delayed synapse against its closed form.
    #[arg(long, conflicts_with = "quiescent")]
    analytic: bool,
    /// Synaptic delay in seconds for `--analytic`.
    #[arg(long, default_value_t = 0.0137)]
    delay: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "ring,lossyring,fiforing,singlespikehold,sortedarray,bitarray32,binaryheap"
    )]
    queue: Vec<QueueKind>,
    /// Defaults to a per-kind value.
    #[arg(long)]
    capacity: Option<usize>,
    /// Largest delay in steps.
    #[arg(long, default_value_t = 24)]
    delay: u64,
    #[arg(long, default_value_t = 1000)]
    traces: u64,
    #[arg(long, default_value_t = 1000)]
    events: usize,
    /// Mean events per step.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli.seed;
    let result = match cli.cmd {
        Cmd::Bench(BenchCmd::Poisson(a)) => cmd_poisson(a, seed),
        Cmd::Bench(BenchCmd::Rsnn(a)) => cmd_rsnn(a, seed),
        Cmd::Bench(BenchCmd::Sweep(a)) => cmd_sweep(a, seed),
        Cmd::Droprate(a) => cmd_droprate(a, seed),
        Cmd::Gradcheck(a) => cmd_gradcheck(a, seed),
        Cmd::Verify(a) => cmd_verify(a, seed),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}

fn emit(records: &[BenchRecord], output: &OutputArgs) -> eventq::Result<ExitCode> {
    let json = match (output.format, &output.out) {
        (Some(f), _) => f == Format::Json,
        (None, Some(p)) => p.extension().is_some_and(|e| e == "json"),
        (None, None) => false,
    };
    let sink: Box<dyn Write> = match &output.out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    if json {
        write_json(records, sink)?;
    } else {
        write_csv(records, sink)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn workload(w: &WorkloadArgs, seed: u64) -> eventq::Result<PoissonWorkload> {
    let w = PoissonWorkload { lambda_steps: w.lambda, delay_steps: w.delay, n_queues: w.batch, steps: w.steps, seed };
    w.validate()?;
    Ok(w)
}

fn distinct(kinds: &[QueueKind]) -> eventq::Result<()> {
    if kinds.is_empty() {
        return Err(Error::Config("no queue kinds given".into()));
    }
    if kinds.iter().enumerate().any(|(i, k)| kinds[..i].contains(k)) {
        return Err(Error::Config("queue kinds must be distinct".into()));
    }
    Ok(())
}

fn cmd_poisson(a: PoissonArgs, seed: u64) -> eventq::Result<ExitCode> {
    distinct(&a.queue)?;
    let w = workload(&a.workload, seed)?;
    let cases = a
        .queue
        .iter()
        .map(|&kind| {
            let cap = a.capacity.unwrap_or_else(|| default_capacity(kind, w.delay_steps));
            // build once so capability errors surface before any timing
            make_queue(kind, cap, w.delay_steps)?;
            Ok((QueueConfig::new(kind, cap, w.delay_steps), w))
        })
        .collect::<eventq::Result<Vec<_>>>()?;
    emit(&run_inference_suite(&cases, a.timing.timing())?, &a.output)
}

fn cmd_rsnn(a: RsnnArgs, seed: u64) -> eventq::Result<ExitCode> {
    distinct(&a.queue)?;
    let mode = match a.mode {
        Mode::Inference => RsnnMode::Inference,
        Mode::ForwardAd => RsnnMode::ForwardAd,
    };
    let mut cases = Vec::new();
    for &kind in &a.queue {
        let params = rsnn_params_for(kind, a.n, a.dt, seed)?;
        match mode {
            RsnnMode::Inference => drop(Network::<f64>::build(&params, SeedDirection::None, 1.0)?),
            RsnnMode::ForwardAd => drop(Network::<Dual>::build(&params, SeedDirection::None, 1.0)?),
        }
        cases.push((params, mode));
    }
    if a.steps == 0 {
        return Err(Error::Config("steps must be positive".into()));
    }
    emit(&run_rsnn_suite(&cases, a.steps, a.timing.timing(), seed)?, &a.output)
}

fn cmd_sweep(a: SweepArgs, seed: u64) -> eventq::Result<ExitCode> {
    distinct(&a.queue)?;
    let axis = match a.axis {
        Axis::Batch => SweepAxis::Batch,
        Axis::Capacity => SweepAxis::Capacity,
        Axis::Pressure => SweepAxis::Pressure,
    };
    let base = SweepBase {
        kinds: a.queue,
        workload: workload(&a.workload, seed)?,
        capacity: a.capacity,
        timing: a.timing.timing(),
    };
    emit(&sweep(axis, &a.grid, &base)?, &a.output)
}

fn cmd_droprate(a: DroprateArgs, seed: u64) -> eventq::Result<ExitCode> {
    distinct(&a.queue)?;
    let w = PoissonWorkload { lambda_steps: a.lambda, delay_steps: 1, n_queues: 1, steps: a.steps, seed };
    w.validate()?;
    let capacities: Vec<Option<usize>> =
        if a.capacity.is_empty() { vec![None] } else { a.capacity.iter().copied().map(Some).collect() };
    let mut rows = Vec::new();
    for &kind in &a.queue {
        for &capacity in &capacities {
            let base = SweepBase { kinds: vec![kind], workload: w, capacity, timing: Timing::default() };
            rows.extend(sweep(SweepAxis::Pressure, &a.pressure, &base)?);
        }
    }
    emit(&rows, &a.output)
}

fn two_neuron(kind: QueueKind, delay: f64, dt: f64) -> NetworkParams {
    NetworkParams {
        n: 2,
        weights: vec![0.0, 1.0, 0.0, 0.0],
        delays: vec![0.0, delay, delay, 0.0],
        bias: vec![0.0; 2],
        target: vec![0.0; 2],
        tau_m: 1.0,
        tau_syn: 0.05,
        v_th: 1.0,
        v_reset: 0.0,
        refractory_steps: 0,
        dt,
        queue: kind,
        capacity: None,
        drive: DriveParams { rate: 0.0, amplitude: 0.0, seed: 0 },
    }
}

/// Neuron 0 is forced to fire at step 10; the delay tangent of the current
/// into neuron 1 decays from `w / tau` at arrival.
fn gradcheck_analytic(a: &GradcheckArgs) -> eventq::Result<ExitCode> {
    const TOL: f64 = 1e-9;
    let (spike_step, end_step) = (10u64, a.steps.max(11));
    let p = two_neuron(a.queue, a.delay, a.dt);
    let mut net = Network::<Dual>::build(&p, SeedDirection::Delay { pre: 0, post: 1 }, end_step as f64 * a.dt)?;
    net.run(spike_step - 1)?;
    net.force_spike(0)?;
    net.run(end_step - spike_step + 1)?;
    let got = net.synaptic_currents()[1].tangent;
    let arrival = spike_step as f64 * a.dt + a.delay;
    let t_end = end_step as f64 * a.dt;
    if arrival > t_end {
        return Err(Error::Config(format!("spike arrives at {arrival} s, after the run ends at {t_end} s")));
    }
    let want = (-(t_end - arrival) / p.tau_syn).exp() / p.tau_syn;
    let rel = (got - want).abs() / want.abs();
    let pass = rel < TOL;
    println!("direction,jvp,reference,rel_err,status");
    println!(
        "{},{got:e},{want:e},{rel:e},{}",
        SeedDirection::Delay { pre: 0, post: 1 },
        if pass { "pass" } else { "fail" }
    );
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(EXIT_RUNTIME) })
}

fn cmd_gradcheck(a: GradcheckArgs, seed: u64) -> eventq::Result<ExitCode> {
    if a.directions == 0 || a.steps == 0 {
        return Err(Error::Config("directions and steps must be positive".into()));
    }
    if !(a.tol > 0.0) || !(a.abs_floor > 0.0) {
        return Err(Error::Config("tolerances must be positive".into()));
    }
    if a.analytic {
        return gradcheck_analytic(&a);
    }
    let mut params = NetworkParams::random(a.n, a.dt, a.queue, seed)?;
    if a.quiescent {
        params.drive.rate = 0.0;
        params.bias = vec![0.0; a.n];
    }
    params.validate()?;
    Network::<Dual>::build(&params, SeedDirection::None, 1.0)?;

    println!("direction,jvp,fd,rel_err,status");
    let (mut checked, mut skipped, mut failed) = (0, 0, 0);
    for dir in SeedDirection::sample(a.n, a.max_draws, seed)? {
        if checked == a.directions {
            break;
        }
        let fd = match grad_fd_oracle(&params, dir, a.steps, a.epsilon) {
            Ok(g) => g,
            Err(Error::NonSmooth { detail }) => {
                eprintln!("skipped {dir}: {detail}");
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let jvp = simulate(&params, dir, a.steps)?.loss.tangent;
        let rel = (jvp - fd).abs() / fd.abs().max(a.abs_floor);
        let pass = rel < a.tol;
        failed += usize::from(!pass);
        checked += 1;
        println!("{dir},{jvp:e},{fd:e},{rel:e},{}", if pass { "pass" } else { "fail" });
    }
    eprintln!("{checked} checked, {failed} failed, {skipped} non-smooth skipped");
    Ok(if checked == 0 {
        ExitCode::from(EXIT_INCONCLUSIVE)
    } else if failed > 0 {
        ExitCode::from(EXIT_RUNTIME)
    } else if checked < a.directions {
        eprintln!("only {checked} of {} smooth directions found", a.directions);
        ExitCode::from(EXIT_INCONCLUSIVE)
    } else {
        ExitCode::SUCCESS
    })
}

/// How one kind is checked.
enum Plan {
    /// Against the dense oracle on traces it represents without loss.
    Lossless(TraceSpec, QueueConfig),
    /// Against a one-slot FIFO on overflowing traces.
    AsFifo(TraceSpec, QueueConfig),
    /// Against the dense oracle; divergence is expected and only reported.
    Lossy(TraceSpec, QueueConfig),
}

fn plan(kind: QueueKind, capacity: Option<usize>, a: &VerifyArgs) -> eventq::Result<Plan> {
    let d = a.delay;
    let cap = capacity.unwrap_or_else(|| match kind {
        QueueKind::SortedArray | QueueKind::BinaryHeap => 64,
        _ => default_capacity(kind, d),
    });
    let config = QueueConfig::new(kind, cap, d);
    let caps = make_queue(kind, cap, d)?.capabilities();
    let mut spec = if caps.supports_heterogeneous_delay {
        TraceSpec::heterogeneous(a.events, d, 0)
    } else {
        TraceSpec::homogeneous(a.events, d, 0)
    };
    spec.rate = a.rate;
    spec.gradients = caps.supports_gradients;
    match kind {
        QueueKind::SingleSpikeHold => {
            // the reference only takes one delay
            spec.homogeneous_delay = Some(d);
            spec.distinct_delivery = true;
            Ok(Plan::AsFifo(spec, config))
        }
        QueueKind::DoNothing | QueueKind::SingleSpikeDrop => Ok(Plan::Lossy(spec, config)),
        QueueKind::LossyRing if (cap as u64) < d => Ok(Plan::Lossy(spec, config)),
        QueueKind::BitArray32 => {
            spec.distinct_delivery = true;
            spec.unit_weights = true;
            Ok(Plan::Lossless(spec, config))
        }
        QueueKind::FifoRing | QueueKind::SortedArray | QueueKind::BinaryHeap => {
            spec.max_in_flight = Some(cap);
            Ok(Plan::Lossless(spec, config))
        }
        _ => Ok(Plan::Lossless(spec, config)),
    }
}

fn cmd_verify(a: VerifyArgs, seed: u64) -> eventq::Result<ExitCode> {
    distinct(&a.queue)?;
    if a.traces == 0 || a.events == 0 || a.delay == 0 {
        return Err(Error::Config("traces, events and delay must be positive".into()));
    }
    let plans = a.queue.iter().map(|&k| Ok((k, plan(k, a.capacity, &a)?))).collect::<eventq::Result<Vec<_>>>()?;
    let dense = QueueConfig::new(QueueKind::DenseOracle, 0, a.delay);
    let mut diverged = false;
    for (kind, plan) in plans {
        let mut first = None;
        let mut equal = 0u64;
        for t in 0..a.traces {
            let trace_seed = seed.wrapping_add(t);
            let (out, label) = match &plan {
                Plan::Lossless(spec, cfg) => (
                    lockstep_equivalence(&TraceSpec { seed: trace_seed, ..*spec }, &dense, &[*cfg], true)?,
                    "dense oracle",
                ),
                Plan::AsFifo(spec, cfg) => {
                    let fifo = QueueConfig::new(QueueKind::FifoRing, 1, a.delay);
                    (
                        lockstep_equivalence(&TraceSpec { seed: trace_seed, ..*spec }, &fifo, &[*cfg], false)?,
                        "fiforing(1)",
                    )
                }
                Plan::Lossy(spec, cfg) => (
                    lockstep_equivalence(&TraceSpec { seed: trace_seed, ..*spec }, &dense, &[*cfg], false)?,
                    "dense oracle",
                ),
            };
            match out[0] {
                Equivalence::Equal => equal += 1,
                Equivalence::Diverged(d) if first.is_none() => first = Some((trace_seed, d, label)),
                Equivalence::Diverged(_) => {}
            }
        }
        let lossy = matches!(plan, Plan::Lossy(..));
        match first {
            None => println!("{kind}: equal on {equal}/{} traces", a.traces),
            Some((s, d, label)) => {
                let note = if lossy { " (expected for a lossy queue)" } else { "" };
                println!(
                    "{kind}: diverged from {label} on {}/{} traces{note}; first at step {} of trace seed {s}: expected weight {}, got {}",
                    a.traces - equal,
                    a.traces,
                    d.step,
                    d.expected.weight.primal,
                    d.got.weight.primal
                );
                diverged |= !lossy;
            }
        }
    }
    eprintln!("platform: {}", platform_label());
    Ok(if diverged { ExitCode::from(EXIT_RUNTIME) } else { ExitCode::SUCCESS })
}
