use crate::grid::CellIndex;
use thiserror::Error;

/// Errors surfaced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("{name} must be at least {min}, got {value}")]
    TooSmall {
        name: &'static str,
        min: i64,
        value: i64,
    },

    #[error("cell {0:?} is not a mixed cell for this radius")]
    NotMixed(CellIndex),

    #[error("cell index {0:?} is outside the input grid")]
    InvalidCell(CellIndex),

    #[error("point ({0}, {1}) lies outside the configured bounding box")]
    PointOutOfBounds(f64, f64),

    #[error("input is empty{}", if .0.is_empty() { String::new() } else { format!(": {}", .0) })]
    EmptyInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("histogram is not normalized: mass sums to {0}")]
    NotNormalized(f64),

    #[error("grids differ between the two histograms")]
    GridMismatch,

    #[error("kernel is not private: output column {output:?} has a zero entry against a positive one")]
    NonPrivateColumn { output: CellIndex },

    #[error("sinkhorn did not converge: marginal violation {violation} above tolerance {tolerance}")]
    SinkhornNotConverged { violation: f64, tolerance: f64 },

    #[error("transport solver failed: {0}")]
    TransportFailed(String),

    #[error("exact transport refused: combined support of {support} cells exceeds the cap of {cap}; use the Sinkhorn approximation instead")]
    SupportTooLarge { support: usize, cap: usize },

    #[error("{path}:{line}: {message}")]
    Csv {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Validates a strictly positive, finite parameter (NaN fails).
pub(crate) fn ensure_positive(value: f64, name: &'static str) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositive { name, value })
    }
}
