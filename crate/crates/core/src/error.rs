use std::fmt;

use thiserror::Error;

use crate::queue::QueueKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A queue feature that a kind or configuration may lack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capability {
    Gradients,
    HeterogeneousDelay,
    MultiSpikePerStep,
    WeightedSpikes,
    /// Maximum representable delay in steps.
    DelayHorizon(u64),
    /// The kind is registered but has no serial implementation.
    Implementation,
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capability::Gradients => f.write_str("gradients"),
            Capability::HeterogeneousDelay => f.write_str("heterogeneous delays"),
            Capability::MultiSpikePerStep => f.write_str("multiple spikes per timestep"),
            Capability::WeightedSpikes => f.write_str("weighted spikes"),
            Capability::DelayHorizon(h) => write!(f, "delays beyond {h} steps"),
            Capability::Implementation => f.write_str("a serial implementation"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{kind} does not support {capability}{}", context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    Unsupported { kind: QueueKind, capability: Capability, context: Option<String> },

    #[error("causality violation: event due at step {deliver_step} enqueued at step {now}")]
    Causality { deliver_step: u64, now: u64 },

    #[error("delay of {delay} steps exceeds the queue horizon of {max_delay} steps")]
    HorizonExceeded { delay: u64, max_delay: u64 },

    #[error("grazing threshold crossing at step {step}: dv/dt = {v_dot:e} is below the floor")]
    GrazingCrossing { step: u64, v_dot: f64 },

    #[error("perturbation changed the spike structure ({detail}); direction is not smooth")]
    NonSmooth { detail: String },

    #[error("trace rejected: {0}")]
    InvalidTrace(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn unsupported(kind: QueueKind, capability: Capability) -> Self {
        Error::Unsupported { kind, capability, context: None }
    }

    /// Configuration and capability problems, as opposed to runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Unsupported { .. } | Error::HorizonExceeded { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
