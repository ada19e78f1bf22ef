use thiserror::Error;

/// Errors raised by the solver and the verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("direct convolution limited to kmax <= {limit}, got kmax = {kmax}")]
    GridTooLarge { kmax: usize, limit: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field has support outside the {0} modes")]
    SupportViolation(&'static str),

    #[error("non-finite state at t = {time}")]
    NonFiniteState { time: f64 },

    #[error("trajectory is not densely recorded (stride {stride})")]
    SamplingTooCoarse { stride: usize },

    #[error("trajectory carries no noise log")]
    MissingNoiseLog,

    #[error("unit intervals do not align with the time step (dt = {dt})")]
    Misaligned { dt: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
