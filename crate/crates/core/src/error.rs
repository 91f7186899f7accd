use thiserror::Error;

use crate::newton::Solution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("basis size overflows for d={dim}, M={degree}")]
    CountOverflow { dim: usize, degree: u32 },

    #[error("non-finite value {value} at point {point:?} ({context})")]
    NonFinite {
        value: f64,
        point: Vec<f64>,
        context: &'static str,
    },

    #[error("Newton iteration did not converge after {} iterations: {reason}", .solution.iterations)]
    NotConverged {
        solution: Box<Solution>,
        reason: String,
    },

    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("pair (S, L) is not detectable: {0}")]
    NotDetectable(String),

    #[error("unstable gain: max real part of closed-loop eigenvalues is {max_real_part:.3e}")]
    UnstableGain { max_real_part: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("integration failed at t={t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("coefficient file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
