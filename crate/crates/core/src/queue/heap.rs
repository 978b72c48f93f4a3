use super::{Capacity, Clock, EventQueue, Pulse, QueueCapabilities, QueueKind, QueueStats, SpikeEvent};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
struct Entry {
    /// Delivery step in the high half, insertion counter in the low half, so
    /// equal steps pop in insertion order.
    key: u128,
    ev: SpikeEvent,
}

impl Entry {
    fn new(seq: u64, ev: SpikeEvent) -> Self {
        Entry { key: ((ev.deliver_step as u128) << 64) | seq as u128, ev }
    }

    #[inline]
    fn before(&self, other: &Entry) -> bool {
        self.key < other.key
    }
}

/// Fixed-capacity binary min-heap keyed on delivery step.
#[derive(Debug, Clone)]
pub struct BinaryHeapQueue {
    heap: Vec<Entry>,
    capacity: usize,
    next_seq: u64,
    due: Pulse,
    clock: Clock,
    stats: QueueStats,
}

impl BinaryHeapQueue {
    pub(crate) fn new(capacity: usize, max_delay: u64) -> Self {
        BinaryHeapQueue {
            heap: Vec::with_capacity(capacity),
            capacity,
            next_seq: 0,
            due: Pulse::ZERO,
            clock: Clock::new(max_delay),
            stats: QueueStats::default(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    // Both sifts carry the moving entry in a hole instead of swapping.
    #[inline]
    fn sift_up(&mut self, mut i: usize) {
        let moving = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if !moving.before(&self.heap[parent]) {
                break;
            }
            self.heap[i] = self.heap[parent];
            i = parent;
        }
        self.heap[i] = moving;
    }

    #[inline]
    fn sift_down(&mut self, mut i: usize) {
        let n = self.heap.len();
        let moving = self.heap[i];
        loop {
            let left = 2 * i + 1;
            if left >= n {
                break;
            }
            let right = left + 1;
            let child = if right < n && self.heap[right].before(&self.heap[left]) { right } else { left };
            if !self.heap[child].before(&moving) {
                break;
            }
            self.heap[i] = self.heap[child];
            i = child;
        }
        self.heap[i] = moving;
    }

    #[inline]
    fn pop_min(&mut self) -> Option<SpikeEvent> {
        let last = self.heap.pop()?;
        if self.heap.is_empty() {
            return Some(last.ev);
        }
        let top = std::mem::replace(&mut self.heap[0], last);
        self.sift_down(0);
        Some(top.ev)
    }

    #[cfg(test)]
    fn is_heap(&self) -> bool {
        (1..self.heap.len()).all(|i| !self.heap[i].before(&self.heap[(i - 1) / 2]))
    }
}

impl EventQueue for BinaryHeapQueue {
    fn kind(&self) -> QueueKind {
        QueueKind::BinaryHeap
    }

    fn capabilities(&self) -> QueueCapabilities {
        QueueCapabilities {
            supports_gradients: true,
            supports_heterogeneous_delay: true,
            supports_multi_spike_per_step: true,
            lossy: true,
            capacity: Capacity::Bounded(self.capacity),
        }
    }

    fn now(&self) -> u64 {
        self.clock.now
    }

    #[inline]
    fn enqueue(&mut self, ev: SpikeEvent) -> Result<bool> {
        self.clock.delay_of(&ev)?;
        if self.heap.len() == self.capacity {
            self.stats.record(false);
            return Ok(false);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry::new(seq, ev));
        self.sift_up(self.heap.len() - 1);
        self.stats.record(true);
        Ok(true)
    }

    #[inline]
    fn pop_due(&mut self) -> Pulse {
        let out = std::mem::take(&mut self.due);
        self.clock.now += 1;
        let now = self.clock.now;
        while self.heap.first().is_some_and(|e| e.ev.deliver_step == now) {
            let ev = self.pop_min().expect("non-empty heap");
            self.due += &ev;
        }
        out
    }

    fn occupancy(&self) -> usize {
        self.heap.len()
    }

    fn stats(&self) -> QueueStats {
        self.stats
    }
}
