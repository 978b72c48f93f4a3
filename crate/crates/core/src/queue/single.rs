use super::{Capacity, Clock, EventQueue, Pulse, QueueCapabilities, QueueKind, QueueStats, SpikeEvent};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingleSpikePolicy {
    /// Keep the stored spike and drop the newcomer.
    Hold,
    /// Replace the stored spike with the newcomer.
    Drop,
}

/// Storage for exactly one in-flight spike.
#[derive(Debug, Clone)]
pub struct SingleSpikeQueue {
    slot: Option<SpikeEvent>,
    policy: SingleSpikePolicy,
    due: Pulse,
    clock: Clock,
    stats: QueueStats,
}

impl SingleSpikeQueue {
    pub(crate) fn new(policy: SingleSpikePolicy, max_delay: u64) -> Self {
        SingleSpikeQueue {
            slot: None,
            policy,
            due: Pulse::ZERO,
            clock: Clock::new(max_delay),
            stats: QueueStats::default(),
        }
    }

    pub fn policy(&self) -> SingleSpikePolicy {
        self.policy
    }
}

impl EventQueue for SingleSpikeQueue {
    fn kind(&self) -> QueueKind {
        match self.policy {
            SingleSpikePolicy::Hold => QueueKind::SingleSpikeHold,
            SingleSpikePolicy::Drop => QueueKind::SingleSpikeDrop,
        }
    }

    fn capabilities(&self) -> QueueCapabilities {
        QueueCapabilities {
            supports_gradients: true,
            supports_heterogeneous_delay: true,
            supports_multi_spike_per_step: false,
            lossy: true,
            capacity: Capacity::Bounded(1),
        }
    }

    fn now(&self) -> u64 {
        self.clock.now
    }

    #[inline]
    fn enqueue(&mut self, ev: SpikeEvent) -> Result<bool> {
        self.clock.delay_of(&ev)?;
        match (self.slot.is_some(), self.policy) {
            (false, _) => {
                self.slot = Some(ev);
                self.stats.record(true);
                Ok(true)
            }
            (true, SingleSpikePolicy::Hold) => {
                self.stats.record(false);
                Ok(false)
            }
            (true, SingleSpikePolicy::Drop) => {
                self.slot = Some(ev);
                self.stats.record(true);
                // the evicted spike is lost
                self.stats.dropped += 1;
                Ok(true)
            }
        }
    }

    #[inline]
    fn pop_due(&mut self) -> Pulse {
        let out = std::mem::take(&mut self.due);
        self.clock.now += 1;
        if let Some(ev) = self.slot {
            if ev.deliver_step == self.clock.now {
                self.due = Pulse::from_event(&ev);
                self.slot = None;
            }
        }
        out
    }

    fn occupancy(&self) -> usize {
        self.slot.is_some() as usize
    }

    fn stats(&self) -> QueueStats {
        self.stats
    }
}
