use thiserror::Error;

#[derive(Error, Debug)]
pub enum TensorError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("mode {mode} out of range for order-{order} tensor")]
    InvalidMode { mode: usize, order: usize },

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("invalid rank: {0}")]
    InvalidRank(String),

    #[error("non-positive entry {value} at flat index {index} under exponent {alpha}")]
    NonPositive { index: usize, value: f64, alpha: f64 },

    #[error("sampling pattern is empty")]
    EmptyMask,

    #[error("weight entry {value} below positivity floor {floor}")]
    WeightBelowFloor { value: f64, floor: f64 },

    #[error("degenerate weight factor in mode {0}")]
    DegenerateFactor(usize),

    #[error("power iteration did not converge after {iterations} iterations (last Rayleigh quotient {rayleigh})")]
    NoConvergence { iterations: usize, rayleigh: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl TensorError {
    /// True for failures caused by an iterative method rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            TensorError::NoConvergence { .. } | TensorError::DegenerateFactor(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, TensorError>;
