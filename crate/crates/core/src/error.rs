use num_complex::Complex64 as C64;
use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A documented precondition did not hold for the given arguments.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The requested object would exceed the configured dimension cap.
    #[error("resource limit exceeded: {what} needs dimension {requested}, cap is {cap}")]
    Resource { what: &'static str, requested: u128, cap: usize },

    /// An eigen/singular value computation could not be trusted.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A nullspace decision fell inside the gap window.
    #[error("numerically inconclusive: {0}")]
    Inconclusive(String),

    /// The soliton phase is not an L-th root of unity.
    #[error("soliton phase {lambda} is not a root of unity of order {half_len} (|λ^L - 1| = {defect:.3e})")]
    PhaseIncompatible { lambda: C64, half_len: usize, defect: f64 },

    /// A conserved quantity could not be rebuilt from soliton charges.
    #[error("decomposition into soliton charges left relative residual {residual:.3e}")]
    TheoremViolation { residual: f64 },

    /// Conjugation by the gate does not map a Pauli generator to a single string.
    #[error("gate is not Clifford: image of {generator} is not a signed Pauli string")]
    NonClifford { generator: &'static str },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
