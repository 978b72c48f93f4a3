use super::{Capacity, Clock, EventQueue, Pulse, QueueCapabilities, QueueKind, QueueStats, SpikeEvent};
use crate::error::{Capability, Error, Result};

/// First-in first-out ring of events for homogeneous delays.
///
/// The first accepted delay locks the queue; a different delay afterwards is
/// a capability error since FIFO order would no longer be delivery order.
/// Incoming events are dropped while the ring is full.
#[derive(Debug, Clone)]
pub struct FifoRing {
    events: Vec<SpikeEvent>,
    head: usize,
    len: usize,
    locked_delay: Option<u64>,
    due: Pulse,
    clock: Clock,
    stats: QueueStats,
}

impl FifoRing {
    pub(crate) fn new(capacity: usize, max_delay: u64) -> Self {
        FifoRing {
            events: vec![SpikeEvent::SENTINEL; capacity],
            head: 0,
            len: 0,
            locked_delay: None,
            due: Pulse::ZERO,
            clock: Clock::new(max_delay),
            stats: QueueStats::default(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.events.len()
    }
}

impl EventQueue for FifoRing {
    fn kind(&self) -> QueueKind {
        QueueKind::FifoRing
    }

    fn capabilities(&self) -> QueueCapabilities {
        QueueCapabilities {
            supports_gradients: true,
            supports_heterogeneous_delay: false,
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
        let delay = self.clock.delay_of(&ev)?;
        match self.locked_delay {
            None => self.locked_delay = Some(delay),
            Some(d) if d != delay => {
                return Err(Error::Unsupported {
                    kind: QueueKind::FifoRing,
                    capability: Capability::HeterogeneousDelay,
                    context: Some(format!("delay {delay} after delay {d}")),
                })
            }
            Some(_) => {}
        }
        let cap = self.events.len();
        if self.len == cap {
            self.stats.record(false);
            return Ok(false);
        }
        let mut tail = self.head + self.len;
        if tail >= cap {
            tail -= cap;
        }
        self.events[tail] = ev;
        self.len += 1;
        self.stats.record(true);
        Ok(true)
    }

    #[inline]
    fn pop_due(&mut self) -> Pulse {
        let out = std::mem::take(&mut self.due);
        self.clock.now += 1;
        let now = self.clock.now;
        while self.len > 0 && self.events[self.head].deliver_step == now {
            self.due += &self.events[self.head];
            self.head += 1;
            if self.head == self.events.len() {
                self.head = 0;
            }
            self.len -= 1;
        }
        out
    }

    fn occupancy(&self) -> usize {
        self.len
    }

    fn stats(&self) -> QueueStats {
        self.stats
    }
}
