//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by kernels, detectors, and the evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Two observations (or parameter vectors) disagree on dimension.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// An observation coordinate or derived statistic is NaN or infinite.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// A parameter violates its documented constraint.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A detector was stepped after it raised its alarm.
    #[error("detector already alarmed at step {time}; reset before reuse")]
    AlreadyAlarmed { time: u64 },

    /// A finite reference database ran out of samples under the fail-fast policy.
    #[error("reference database exhausted after {drawn} draws ({len} samples, policy fail)")]
    ReferenceExhausted { drawn: u64, len: usize },

    /// The requested change is not detectable: squared MMD distance does not
    /// exceed the drift shift delta.
    #[error("change not detectable: mmd2 {mmd2} <= delta {delta}")]
    Undetectable { mmd2: f64, delta: f64 },

    /// An input collection was empty where at least one element is required.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A config file or descriptor could not be interpreted.
    #[error("config error: {0}")]
    Config(String),

    /// A data stream could not be parsed.
    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
