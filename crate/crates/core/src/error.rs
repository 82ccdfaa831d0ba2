use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the optimization library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite activation in layer {layer}")]
    NonFiniteActivation { layer: usize },

    #[error("iterate diverged (non-finite) at step {step}")]
    Divergence { step: u64 },

    #[error("{what} = {requested} exceeds the cap of {cap}")]
    ResourceLimit {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("quadrature grid does not cover the integrand: {0}")]
    GridCoverage(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("symmetric eigensolver did not converge")]
    NoConvergence,

    #[error("angle is undefined for a zero vector")]
    UndefinedAngle,

    /// No scope in the search range brings the gradient ratio into the band.
    /// `curve` holds the probed `(gamma, median ratio)` pairs.
    #[error("gamma calibration failed: no scope in range reaches the target ratio band")]
    Calibration { curve: Vec<(f64, f64)> },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
