use thiserror::Error;

/// Errors produced by operator construction and application.
#[derive(Error, Debug)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("deapodization weight magnitude {value:.3e} below 1e-12 at index {index}; kernel too narrow for grid")]
    DeapodizationUnderflow { index: usize, value: f64 },

    #[error("solver diverged: objective became non-finite at iteration {iteration}")]
    SolverDiverged {
        iteration: usize,
        trace: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
