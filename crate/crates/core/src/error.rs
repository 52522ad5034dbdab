use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    ShapeMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("invalid dimensions {width}x{height}: {reason}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        reason: &'static str,
    },

    /// A pointwise operation was applied outside its domain (ln of a
    /// nonpositive entry, division by zero, ...).
    #[error("domain error in {op} at pixel {index}: value {value}")]
    Domain {
        op: &'static str,
        index: usize,
        value: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("negative clean intensity {value} at pixel {index}")]
    NegativeIntensity { index: usize, value: f64 },

    #[error("unknown phantom kind `{0}`")]
    UnknownPhantom(String),

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {relative_residual:e})")]
    CgNotConverged {
        iterations: usize,
        relative_residual: f64,
    },

    #[error("solver failed at iteration {iteration}: {source}")]
    Solver {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Metric(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
