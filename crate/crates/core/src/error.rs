use thiserror::Error;

use crate::pde::BlowUpReport;

pub type Result<T> = std::result::Result<T, KsError>;

#[derive(Debug, Error)]
pub enum KsError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimated error {error:e} after {intervals} subintervals")]
    Quadrature { a: f64, b: f64, error: f64, intervals: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("blow-up detected at t = {} (step {}): sup |rho| = {:e}", .0.t, .0.step, .0.sup_norm)]
    BlowUp(BlowUpReport),

    #[error("non-finite position for particle {particle} at t = {t}: drift magnitude {drift_magnitude:e}")]
    NonFinite { particle: usize, t: f64, drift_magnitude: f64 },

    #[error("backend mismatch: {0}")]
    BackendMismatch(String),

    #[error("memory cutoff violation: {0}")]
    CutoffViolation(String),

    #[error("configuration mismatch between runs: {0}")]
    ConfigMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl KsError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        KsError::Domain(msg.into())
    }
}
