use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("diffusion matrix rejected: {0}")]
    InvalidDiffusion(String),

    #[error("potential descriptor has no gradient")]
    MissingGradient,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("drift evaluated at singular point {point:?}")]
    SingularPoint { point: Vec<f64> },

    #[error("mollification failed at x = {x:?}: doubling the quadrature changed the value by {rel_change:.3e}")]
    MollificationFailure { x: Vec<f64>, rel_change: f64 },

    #[error("quadrature box does not cover the reference measure (boundary density ratio {ratio:.3e})")]
    BoxTooSmall { ratio: f64 },

    #[error("quadrature diverged: {0}")]
    Divergent(String),

    #[error("{rejected} of {total} paths rejected (limit 1%)")]
    RejectedPaths { rejected: usize, total: usize },

    #[error("support of size {size} exceeds the oracle limit {max}")]
    SupportTooLarge { size: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
