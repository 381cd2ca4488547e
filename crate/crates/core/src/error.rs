use alloc::vec::Vec;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("mode {mode} out of range for a tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("invalid shape {0:?}: every dimension must be positive and the order at least 1")]
    InvalidShape(Vec<usize>),

    #[error("data length {found} does not match shape product {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("rank {rank} outside the admissible range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("input vector is not unit norm (norm = {0})")]
    NotUnitNorm(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}
