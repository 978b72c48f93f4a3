//! Spike delay queues with forward-mode gradients, a small recurrent LIF
//! network built on them, and benchmark drivers.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ad;
pub mod bench;
pub mod error;
pub mod grad;
pub mod network;
pub mod neuro;
pub mod queue;

pub use ad::{Dual, Scalar};
pub use error::{Capability, Error, Result};
pub use queue::{make_queue, AnyQueue, EventQueue, Pulse, QueueConfig, QueueKind, SpikeEvent};
