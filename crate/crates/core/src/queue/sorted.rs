use super::{Capacity, Clock, EventQueue, Pulse, QueueCapabilities, QueueKind, QueueStats, SpikeEvent};
use crate::error::Result;

/// Fixed-length array kept sorted by delivery step.
///
/// The array always spans its full capacity, padded with sentinel entries,
/// and both insertion and delivery move the whole tail: a new event goes in
/// at its binary-searched position (after equal keys, so merge order is
/// insertion order) and delivery shifts the remainder to the front.
#[derive(Debug, Clone)]
pub struct SortedArray {
    events: Vec<SpikeEvent>,
    count: usize,
    due: Pulse,
    clock: Clock,
    stats: QueueStats,
}

impl SortedArray {
    pub(crate) fn new(capacity: usize, max_delay: u64) -> Self {
        SortedArray {
            events: vec![SpikeEvent::SENTINEL; capacity],
            count: 0,
            due: Pulse::ZERO,
            clock: Clock::new(max_delay),
            stats: QueueStats::default(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.events.len()
    }

    /// Delivery steps of the stored events, in storage order.
    pub fn keys(&self) -> Vec<u64> {
        self.events[..self.count].iter().map(|e| e.deliver_step).collect()
    }
}

impl EventQueue for SortedArray {
    fn kind(&self) -> QueueKind {
        QueueKind::SortedArray
    }

    fn capabilities(&self) -> QueueCapabilities {
        QueueCapabilities {
            supports_gradients: true,
            supports_heterogeneous_delay: true,
            supports_multi_spike_per_step: true,
            lossy: true,
            capacity: Capacity::Bounded(self.events.len()),
        }
    }

    fn now(&self) -> u64 {
        self.clock.now
    }

    #[inline]
    fn enqueue(&mut self, ev: SpikeEvent) -> Result<bool> {
        self.clock.delay_of(&ev)?;
        let n = self.events.len();
        if self.count == n {
            self.stats.record(false);
            return Ok(false);
        }
        let pos = self.events[..self.count].partition_point(|e| e.deliver_step <= ev.deliver_step);
        self.events.copy_within(pos..n - 1, pos + 1);
        self.events[pos] = ev;
        self.count += 1;
        self.stats.record(true);
        Ok(true)
    }

    #[inline]
    fn pop_due(&mut self) -> Pulse {
        let out = std::mem::take(&mut self.due);
        self.clock.now += 1;
        let now = self.clock.now;
        let mut k = 0;
        while k < self.count && self.events[k].deliver_step == now {
            self.due += &self.events[k];
            k += 1;
        }
        if k > 0 {
            let n = self.events.len();
            self.events.copy_within(k..n, 0);
            self.events[n - k..].fill(SpikeEvent::SENTINEL);
            self.count -= k;
        }
        out
    }

    fn occupancy(&self) -> usize {
        self.count
    }

    fn stats(&self) -> QueueStats {
        self.stats
    }
}
