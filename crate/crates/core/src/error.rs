use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid modulus: {0}")]
    InvalidModulus(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("too large: {0}")]
    TooLarge(String),
    #[error("invalid scrambling depth {depth} for m = {m}")]
    InvalidDepth { depth: u32, m: u32 },
    #[error("unsupported weights: {0}")]
    UnsupportedWeights(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("plan error: {0}")]
    Plan(String),
    #[error("parameters out of regime: {0}")]
    OutOfRegime(String),
    #[error("insufficient replicates: got {got}, need at least {min}")]
    InsufficientReplicates { got: usize, min: usize },
    #[error("error bound violated: {0}")]
    BoundViolated(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
