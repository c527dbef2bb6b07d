use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("particles {i} and {j} collide (separation {separation:e})")]
    Collision { i: usize, j: usize, separation: f64 },

    #[error("particles {i} and {j} are out of order in the one-dimensional chamber")]
    Ordering { i: usize, j: usize },

    #[error("particle {particle} has a non-finite coordinate")]
    NonFinite { particle: usize },

    #[error("pairwise potential evaluated at zero separation")]
    SingularInput,

    #[error("{op} is not defined for {kind}")]
    Kind { op: &'static str, kind: String },

    #[error("state shape does not match configuration: {0}")]
    Shape(String),

    #[error("rejection sampler acceptance {acceptance:e} below 1e-3")]
    EnvelopeFailure { acceptance: f64 },

    #[error("collision not resolved after {halvings} step halvings at step {step}: {detail}")]
    CollisionAbort { step: u64, halvings: u32, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
