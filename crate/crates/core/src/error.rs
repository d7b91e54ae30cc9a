use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    /// The query point sits on (or numerically next to) the medial axis.
    #[error("ambiguous projection: point is within {distance:e} of the medial axis")]
    AmbiguousProjection { distance: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver did not converge for pair {pair}")]
    NoConvergence { pair: usize },

    #[error("shift a = {shift} is smaller than eigenvalue {eigenvalue}")]
    ShiftTooSmall { shift: f64, eigenvalue: f64 },

    #[error("objective diverged at step {step}")]
    Divergence { step: usize },

    #[error("degenerate fit: all errors identical")]
    DegenerateFit,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
