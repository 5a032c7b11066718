use thiserror::Error;

use crate::train::TraceRow;

#[derive(Debug, Error)]
pub enum Error {
    /// An integrand, derivative or network output was NaN or infinite.
    #[error("non-finite evaluation at {location:?}")]
    NonFinite { location: Vec<f64> },

    #[error("cannot give each of {intervals} sub-intervals a trapezoid with a budget of {total}")]
    Infeasible { intervals: usize, total: usize },

    #[error("point {location:?} lies outside the domain {domain}")]
    OutsideDomain { location: Vec<f64>, domain: String },

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    /// Training produced a non-finite loss. `rows` holds the trace recorded
    /// before the failure.
    #[error("non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize, rows: Vec<TraceRow> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
