//! Spike-event delay queues.
//!
//! Every queue kind shares one clock discipline. `now` is the step whose
//! pulse the next [`EventQueue::pop_due`] returns; events may be enqueued for
//! any later step within the configured horizon. When the clock advances, the
//! events due at the new `now` leave storage and wait in a one-step output
//! latch, so capacity counts only strictly-future events. A ring with `C`
//! slots therefore holds delays `1..=C`.

mod bitarray;
mod dense;
mod equivalence;
mod fifo;
mod heap;
mod ring;
mod single;
mod sorted;

use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ad::Dual;
use crate::error::{Capability, Error, Result};

pub use bitarray::BitArrayQueue;
pub use dense::DenseOracle;
pub use equivalence::{
    compare_kinds, dense_oracle_equivalence, first_divergence, lockstep_equivalence, random_trace, replay,
    replay_against, validate_trace, Divergence, Equivalence, TraceChecker, TraceEntry, TraceGen, TraceSpec,
};
pub use fifo::FifoRing;
pub use heap::BinaryHeapQueue;
pub use ring::RingQueue;
pub use single::{SingleSpikePolicy, SingleSpikeQueue};
pub use sorted::SortedArray;

/// A spike scheduled for delivery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeEvent {
    pub deliver_step: u64,
    /// Jump magnitude applied to the receiving state.
    pub weight: Dual,
    /// Derivative of the arrival time along the seeded direction.
    pub time_tangent: f64,
}

impl SpikeEvent {
    pub const fn new(deliver_step: u64, weight: Dual, time_tangent: f64) -> Self {
        SpikeEvent { deliver_step, weight, time_tangent }
    }

    /// Unweighted spike without gradient information.
    pub const fn unit(deliver_step: u64) -> Self {
        SpikeEvent { deliver_step, weight: Dual::constant(1.0), time_tangent: 0.0 }
    }

    pub fn carries_gradient(&self) -> bool {
        self.weight.tangent != 0.0 || self.time_tangent != 0.0
    }

    pub(crate) const SENTINEL: SpikeEvent =
        SpikeEvent { deliver_step: u64::MAX, weight: Dual::ZERO, time_tangent: 0.0 };
}

/// Everything delivered in one step, merged under linear superposition.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pulse {
    /// Sum of weights (with summed weight tangents).
    pub weight: Dual,
    /// Sum of `weight * time_tangent` over merged events.
    pub weighted_time_tangent: f64,
}

impl Pulse {
    pub const ZERO: Pulse = Pulse { weight: Dual::ZERO, weighted_time_tangent: 0.0 };

    #[inline]
    pub fn from_event(ev: &SpikeEvent) -> Self {
        Pulse { weight: ev.weight, weighted_time_tangent: ev.weight.primal * ev.time_tangent }
    }

    #[inline]
    pub fn merge(self, other: Pulse) -> Pulse {
        Pulse {
            weight: self.weight + other.weight,
            weighted_time_tangent: self.weighted_time_tangent + other.weighted_time_tangent,
        }
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        *self == Pulse::ZERO
    }
}

impl Add for Pulse {
    type Output = Pulse;
    #[inline]
    fn add(self, rhs: Pulse) -> Pulse {
        self.merge(rhs)
    }
}

impl AddAssign for Pulse {
    #[inline]
    fn add_assign(&mut self, rhs: Pulse) {
        *self = self.merge(rhs);
    }
}

impl AddAssign<&SpikeEvent> for Pulse {
    #[inline]
    fn add_assign(&mut self, ev: &SpikeEvent) {
        *self = self.merge(Pulse::from_event(ev));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum QueueKind {
    DoNothing,
    Ring,
    LossyRing,
    FifoRing,
    SingleSpikeHold,
    SingleSpikeDrop,
    SortedArray,
    BitArray32,
    BinaryHeap,
    /// Registered for completeness; the group-parallel heap has no serial implementation.
    Bgpq,
    DenseOracle,
}

impl QueueKind {
    /// Kinds with an implementation, in benchmark order.
    pub const IMPLEMENTED: [QueueKind; 10] = [
        QueueKind::DoNothing,
        QueueKind::Ring,
        QueueKind::LossyRing,
        QueueKind::FifoRing,
        QueueKind::SingleSpikeHold,
        QueueKind::SingleSpikeDrop,
        QueueKind::SortedArray,
        QueueKind::BitArray32,
        QueueKind::BinaryHeap,
        QueueKind::DenseOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QueueKind::DoNothing => "donothing",
            QueueKind::Ring => "ring",
            QueueKind::LossyRing => "lossyring",
            QueueKind::FifoRing => "fiforing",
            QueueKind::SingleSpikeHold => "singlespikehold",
            QueueKind::SingleSpikeDrop => "singlespikedrop",
            QueueKind::SortedArray => "sortedarray",
            QueueKind::BitArray32 => "bitarray32",
            QueueKind::BinaryHeap => "binaryheap",
            QueueKind::Bgpq => "bgpq",
            QueueKind::DenseOracle => "denseoracle",
        }
    }

    /// Kinds that cannot hold the same per-step merged pulse from several
    /// sources, and therefore need one queue per edge in a network.
    pub fn needs_per_edge_wiring(self) -> bool {
        matches!(self, QueueKind::SingleSpikeHold | QueueKind::SingleSpikeDrop | QueueKind::BitArray32)
    }
}

impl fmt::Display for QueueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueueKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        QueueKind::IMPLEMENTED
            .iter()
            .chain(std::iter::once(&QueueKind::Bgpq))
            .copied()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::Config(format!("unknown queue kind `{s}`")))
    }
}

impl From<QueueKind> for String {
    fn from(k: QueueKind) -> String {
        k.name().to_string()
    }
}

impl TryFrom<String> for QueueKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Bounded(usize),
    Unbounded,
}

impl Capacity {
    pub fn admits(self, n: usize) -> bool {
        match self {
            Capacity::Bounded(c) => n <= c,
            Capacity::Unbounded => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueCapabilities {
    pub supports_gradients: bool,
    pub supports_heterogeneous_delay: bool,
    pub supports_multi_spike_per_step: bool,
    pub lossy: bool,
    pub capacity: Capacity,
}

/// Enqueue outcome counters. `dropped` includes events evicted by a
/// replacing enqueue; `aliased` events were stored at a wrong delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QueueStats {
    pub offered: u64,
    pub accepted: u64,
    pub dropped: u64,
    pub aliased: u64,
    pub merged: u64,
}

impl QueueStats {
    /// Events that will never be delivered at their own step.
    pub fn lost(&self) -> u64 {
        self.dropped + self.aliased
    }

    pub(crate) fn record(&mut self, accepted: bool) {
        self.offered += 1;
        if accepted {
            self.accepted += 1;
        } else {
            self.dropped += 1;
        }
    }
}

impl AddAssign for QueueStats {
    fn add_assign(&mut self, o: QueueStats) {
        self.offered += o.offered;
        self.accepted += o.accepted;
        self.dropped += o.dropped;
        self.aliased += o.aliased;
        self.merged += o.merged;
    }
}

/// The interface every queue kind satisfies.
pub trait EventQueue {
    fn kind(&self) -> QueueKind;
    fn capabilities(&self) -> QueueCapabilities;
    /// Step whose pulse the next `pop_due` returns.
    fn now(&self) -> u64;
    /// Store `ev`, returning whether it was kept. Capability and causality
    /// violations are errors, never silent drops.
    fn enqueue(&mut self, ev: SpikeEvent) -> Result<bool>;
    /// Merge of everything due at `now`, then advance the clock by one step.
    fn pop_due(&mut self) -> Pulse;
    /// Undelivered events held in storage (a ring counts occupied slots).
    fn occupancy(&self) -> usize;
    fn stats(&self) -> QueueStats;
}

/// Clock and horizon bookkeeping shared by all kinds.
#[derive(Debug, Clone)]
pub(crate) struct Clock {
    pub now: u64,
    pub max_delay: u64,
}

impl Clock {
    fn new(max_delay: u64) -> Self {
        Clock { now: 0, max_delay }
    }

    /// Delay of `ev` in steps, checked against causality and the horizon.
    #[inline]
    pub fn delay_of(&self, ev: &SpikeEvent) -> Result<u64> {
        if ev.deliver_step <= self.now {
            return Err(Error::Causality { deliver_step: ev.deliver_step, now: self.now });
        }
        let delay = ev.deliver_step - self.now;
        if delay > self.max_delay {
            return Err(Error::HorizonExceeded { delay, max_delay: self.max_delay });
        }
        Ok(delay)
    }
}

/// Drops every spike and never delivers. Reference for queue-independent cost.
#[derive(Debug, Clone)]
pub struct DoNothing {
    clock: Clock,
    stats: QueueStats,
}

impl DoNothing {
    pub fn new(max_delay: u64) -> Self {
        DoNothing { clock: Clock::new(max_delay), stats: QueueStats::default() }
    }
}

impl EventQueue for DoNothing {
    fn kind(&self) -> QueueKind {
        QueueKind::DoNothing
    }

    fn capabilities(&self) -> QueueCapabilities {
        QueueCapabilities {
            supports_gradients: true,
            supports_heterogeneous_delay: true,
            supports_multi_spike_per_step: true,
            lossy: true,
            capacity: Capacity::Bounded(0),
        }
    }

    fn now(&self) -> u64 {
        self.clock.now
    }

    #[inline]
    fn enqueue(&mut self, ev: SpikeEvent) -> Result<bool> {
        self.clock.delay_of(&ev)?;
        self.stats.record(false);
        Ok(false)
    }

    #[inline]
    fn pop_due(&mut self) -> Pulse {
        self.clock.now += 1;
        Pulse::ZERO
    }

    fn occupancy(&self) -> usize {
        0
    }

    fn stats(&self) -> QueueStats {
        self.stats
    }
}

/// Construction parameters for a queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueConfig {
    pub kind: QueueKind,
    pub capacity: usize,
    pub max_delay: u64,
}

impl QueueConfig {
    pub fn new(kind: QueueKind, capacity: usize, max_delay: u64) -> Self {
        QueueConfig { kind, capacity, max_delay }
    }

    pub fn build(&self) -> Result<AnyQueue> {
        make_queue(self.kind, self.capacity, self.max_delay)
    }
}

/// Build an empty queue at step 0.
pub fn make_queue(kind: QueueKind, capacity: usize, max_delay: u64) -> Result<AnyQueue> {
    if max_delay == 0 {
        return Err(Error::Config("max_delay must be at least one step".into()));
    }
    let needs_capacity = matches!(
        kind,
        QueueKind::Ring | QueueKind::LossyRing | QueueKind::FifoRing | QueueKind::SortedArray | QueueKind::BinaryHeap
    );
    if needs_capacity && capacity == 0 {
        return Err(Error::Config(format!("{kind} needs a capacity of at least one")));
    }
    Ok(match kind {
        QueueKind::DoNothing => AnyQueue::DoNothing(DoNothing::new(max_delay)),
        QueueKind::Ring => {
            if (capacity as u64) < max_delay {
                return Err(Error::Unsupported {
                    kind,
                    capability: Capability::DelayHorizon(capacity as u64),
                    context: Some(format!(
                        "capacity {capacity} < max_delay {max_delay}; use lossyring for a short ring"
                    )),
                });
            }
            AnyQueue::Ring(RingQueue::new(capacity, max_delay, false))
        }
        QueueKind::LossyRing => AnyQueue::LossyRing(RingQueue::new(capacity, max_delay, true)),
        QueueKind::FifoRing => AnyQueue::FifoRing(FifoRing::new(capacity, max_delay)),
        QueueKind::SingleSpikeHold => AnyQueue::SingleSpike(SingleSpikeQueue::new(SingleSpikePolicy::Hold, max_delay)),
        QueueKind::SingleSpikeDrop => AnyQueue::SingleSpike(SingleSpikeQueue::new(SingleSpikePolicy::Drop, max_delay)),
        QueueKind::SortedArray => AnyQueue::SortedArray(SortedArray::new(capacity, max_delay)),
        QueueKind::BitArray32 => {
            if max_delay > BitArrayQueue::HORIZON {
                return Err(Error::Unsupported {
                    kind,
                    capability: Capability::DelayHorizon(BitArrayQueue::HORIZON),
                    context: Some(format!("max_delay {max_delay} does not fit one 32-bit word")),
                });
            }
            AnyQueue::BitArray32(BitArrayQueue::new(max_delay))
        }
        QueueKind::BinaryHeap => AnyQueue::BinaryHeap(BinaryHeapQueue::new(capacity, max_delay)),
        QueueKind::DenseOracle => AnyQueue::DenseOracle(DenseOracle::new()),
        QueueKind::Bgpq => return Err(Error::unsupported(kind, Capability::Implementation)),
    })
}

/// Static dispatch over every implemented kind.
#[derive(Debug, Clone)]
pub enum AnyQueue {
    DoNothing(DoNothing),
    Ring(RingQueue),
    LossyRing(RingQueue),
    FifoRing(FifoRing),
    SingleSpike(SingleSpikeQueue),
    SortedArray(SortedArray),
    BitArray32(BitArrayQueue),
    BinaryHeap(BinaryHeapQueue),
    DenseOracle(DenseOracle),
}

macro_rules! dispatch {
    ($self:ident, $q:ident => $e:expr) => {
        match $self {
            AnyQueue::DoNothing($q) => $e,
            AnyQueue::Ring($q) => $e,
            AnyQueue::LossyRing($q) => $e,
            AnyQueue::FifoRing($q) => $e,
            AnyQueue::SingleSpike($q) => $e,
            AnyQueue::SortedArray($q) => $e,
            AnyQueue::BitArray32($q) => $e,
            AnyQueue::BinaryHeap($q) => $e,
            AnyQueue::DenseOracle($q) => $e,
        }
    };
}

impl EventQueue for AnyQueue {
    fn kind(&self) -> QueueKind {
        dispatch!(self, q => q.kind())
    }

    fn capabilities(&self) -> QueueCapabilities {
        dispatch!(self, q => q.capabilities())
    }

    #[inline]
    fn now(&self) -> u64 {
        dispatch!(self, q => q.now())
    }

    #[inline]
    fn enqueue(&mut self, ev: SpikeEvent) -> Result<bool> {
        dispatch!(self, q => q.enqueue(ev))
    }

    #[inline]
    fn pop_due(&mut self) -> Pulse {
        dispatch!(self, q => q.pop_due())
    }

    fn occupancy(&self) -> usize {
        dispatch!(self, q => q.occupancy())
    }

    fn stats(&self) -> QueueStats {
        dispatch!(self, q => q.stats())
    }
}
