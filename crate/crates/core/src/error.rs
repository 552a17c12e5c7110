use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("point outside the feasible box at coordinate {coordinate}: {value} not in [{lower}, {upper}]")]
    OutOfBounds {
        coordinate: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("Gram matrix is not positive definite (largest jitter tried {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("Sobol' stream exhausted: requested {requested} points at cursor {cursor}")]
    StreamExhausted { cursor: u64, requested: u64 },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("curve grids do not match: {0}")]
    GridMismatch(String),

    #[error("trace sink failed: {0}")]
    Sink(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
