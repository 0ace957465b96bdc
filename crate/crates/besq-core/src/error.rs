use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error(
        "startup expansion residual {residual:.3e} exceeds tolerance {tolerance:.3e}; \
         increase the node count or the number of startup nodes"
    )]
    Refinement { residual: f64, tolerance: f64 },

    #[error("endpoint defect {defect:.3e} above target {target:.3e} after full penalty schedule")]
    NonConvergence {
        defect: f64,
        target: f64,
        best_energy: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
