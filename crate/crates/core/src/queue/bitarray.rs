use super::{Capacity, Clock, EventQueue, Pulse, QueueCapabilities, QueueKind, QueueStats, SpikeEvent};
use crate::ad::Dual;
use crate::error::{Capability, Error, Result};

/// Pending unit spikes packed in one 32-bit word.
///
/// Bit `i` stands for a spike due `i + 1` steps after `now`; the word shifts
/// right by one every step. Only unweighted spikes with one homogeneous delay
/// are representable, and there is no room for tangents.
#[derive(Debug, Clone)]
pub struct BitArrayQueue {
    bits: u32,
    due: bool,
    locked_delay: Option<u64>,
    clock: Clock,
    stats: QueueStats,
}

impl BitArrayQueue {
    pub const HORIZON: u64 = 32;

    pub(crate) fn new(max_delay: u64) -> Self {
        BitArrayQueue {
            bits: 0,
            due: false,
            locked_delay: None,
            clock: Clock::new(max_delay),
            stats: QueueStats::default(),
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    fn unsupported(capability: Capability, context: String) -> Error {
        Error::Unsupported { kind: QueueKind::BitArray32, capability, context: Some(context) }
    }
}

impl EventQueue for BitArrayQueue {
    fn kind(&self) -> QueueKind {
        QueueKind::BitArray32
    }

    fn capabilities(&self) -> QueueCapabilities {
        QueueCapabilities {
            supports_gradients: false,
            supports_heterogeneous_delay: false,
            supports_multi_spike_per_step: false,
            lossy: true,
            capacity: Capacity::Bounded(Self::HORIZON as usize),
        }
    }

    fn now(&self) -> u64 {
        self.clock.now
    }

    #[inline]
    fn enqueue(&mut self, ev: SpikeEvent) -> Result<bool> {
        if ev.carries_gradient() {
            return Err(Self::unsupported(Capability::Gradients, "primal and tangent share one bit".into()));
        }
        if ev.weight != Dual::constant(1.0) {
            return Err(Self::unsupported(Capability::WeightedSpikes, format!("weight {}", ev.weight.primal)));
        }
        let delay = self.clock.delay_of(&ev)?;
        match self.locked_delay {
            None => self.locked_delay = Some(delay),
            Some(d) if d != delay => {
                return Err(Self::unsupported(Capability::HeterogeneousDelay, format!("delay {delay} after delay {d}")))
            }
            Some(_) => {}
        }
        let mask = 1u32 << (delay - 1);
        if self.bits & mask != 0 {
            self.stats.record(false);
            return Ok(false);
        }
        self.bits |= mask;
        self.stats.record(true);
        Ok(true)
    }

    #[inline]
    fn pop_due(&mut self) -> Pulse {
        let out =
            if self.due { Pulse { weight: Dual::constant(1.0), weighted_time_tangent: 0.0 } } else { Pulse::ZERO };
        self.clock.now += 1;
        self.due = self.bits & 1 != 0;
        self.bits >>= 1;
        out
    }

    fn occupancy(&self) -> usize {
        self.bits.count_ones() as usize
    }

    fn stats(&self) -> QueueStats {
        self.stats
    }
}
