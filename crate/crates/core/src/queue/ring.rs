use super::{Capacity, Clock, EventQueue, Pulse, QueueCapabilities, QueueKind, QueueStats, SpikeEvent};
use crate::error::Result;

/// Circular delay line of per-step merged pulses.
///
/// An event with delay `d` lands in the slot `d` positions ahead of the
/// current one; same-step arrivals are summed in place. The lossy variant
/// accepts delays beyond its length and wraps them modulo the capacity.
#[derive(Debug, Clone)]
pub struct RingQueue {
    slots: Vec<Pulse>,
    counts: Vec<u32>,
    /// Slot of step `now`; always empty because its content sits in `due`.
    base: usize,
    due: Pulse,
    occupied: usize,
    lossy: bool,
    clock: Clock,
    stats: QueueStats,
}

impl RingQueue {
    pub(crate) fn new(capacity: usize, max_delay: u64, lossy: bool) -> Self {
        RingQueue {
            slots: vec![Pulse::ZERO; capacity],
            counts: vec![0; capacity],
            base: 0,
            due: Pulse::ZERO,
            occupied: 0,
            lossy,
            clock: Clock::new(max_delay),
            stats: QueueStats::default(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    #[inline]
    fn slot_for(&self, delay: usize) -> usize {
        let i = self.base + delay;
        if i >= self.slots.len() {
            i - self.slots.len()
        } else {
            i
        }
    }
}

impl EventQueue for RingQueue {
    fn kind(&self) -> QueueKind {
        if self.lossy {
            QueueKind::LossyRing
        } else {
            QueueKind::Ring
        }
    }

    fn capabilities(&self) -> QueueCapabilities {
        QueueCapabilities {
            supports_gradients: true,
            supports_heterogeneous_delay: true,
            supports_multi_spike_per_step: true,
            lossy: self.lossy,
            capacity: Capacity::Bounded(self.slots.len()),
        }
    }

    fn now(&self) -> u64 {
        self.clock.now
    }

    #[inline]
    fn enqueue(&mut self, ev: SpikeEvent) -> Result<bool> {
        let mut delay = self.clock.delay_of(&ev)?;
        let cap = self.slots.len() as u64;
        if delay > cap {
            // only reachable for the lossy variant: the constructor ties a
            // lossless ring's horizon to its length
            delay = (delay - 1) % cap + 1;
            self.stats.aliased += 1;
        }
        let slot = self.slot_for(delay as usize);
        if self.counts[slot] == 0 {
            self.occupied += 1;
        } else {
            self.stats.merged += 1;
        }
        self.counts[slot] += 1;
        self.slots[slot] += &ev;
        self.stats.offered += 1;
        self.stats.accepted += 1;
        Ok(true)
    }

    #[inline]
    fn pop_due(&mut self) -> Pulse {
        let out = std::mem::take(&mut self.due);
        self.clock.now += 1;
        self.base += 1;
        if self.base == self.slots.len() {
            self.base = 0;
        }
        if self.counts[self.base] != 0 {
            self.due = std::mem::take(&mut self.slots[self.base]);
            self.counts[self.base] = 0;
            self.occupied -= 1;
        }
        out
    }

    fn occupancy(&self) -> usize {
        self.occupied
    }

    fn stats(&self) -> QueueStats {
        self.stats
    }
}
