use std::collections::VecDeque;

use super::{Capacity, EventQueue, Pulse, QueueCapabilities, QueueKind, QueueStats, SpikeEvent};
use crate::error::{Error, Result};

/// Unbounded per-step merge slots. Never drops; the reference for
/// equivalence runs.
#[derive(Debug, Clone, Default)]
pub struct DenseOracle {
    /// `future[i]` holds step `now + 1 + i` with its event count.
    future: VecDeque<(Pulse, u32)>,
    due: Pulse,
    now: u64,
    stored: usize,
    stats: QueueStats,
}

impl DenseOracle {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EventQueue for DenseOracle {
    fn kind(&self) -> QueueKind {
        QueueKind::DenseOracle
    }

    fn capabilities(&self) -> QueueCapabilities {
        QueueCapabilities {
            supports_gradients: true,
            supports_heterogeneous_delay: true,
            supports_multi_spike_per_step: true,
            lossy: false,
            capacity: Capacity::Unbounded,
        }
    }

    fn now(&self) -> u64 {
        self.now
    }

    fn enqueue(&mut self, ev: SpikeEvent) -> Result<bool> {
        if ev.deliver_step <= self.now {
            return Err(Error::Causality { deliver_step: ev.deliver_step, now: self.now });
        }
        let idx = (ev.deliver_step - self.now - 1) as usize;
        while self.future.len() <= idx {
            self.future.push_back((Pulse::ZERO, 0));
        }
        let slot = &mut self.future[idx];
        slot.0 += &ev;
        slot.1 += 1;
        self.stored += 1;
        self.stats.record(true);
        Ok(true)
    }

    fn pop_due(&mut self) -> Pulse {
        let out = std::mem::take(&mut self.due);
        self.now += 1;
        if let Some((pulse, n)) = self.future.pop_front() {
            self.due = pulse;
            self.stored -= n as usize;
        }
        out
    }

    fn occupancy(&self) -> usize {
        self.stored
    }

    fn stats(&self) -> QueueStats {
        self.stats
    }
}
