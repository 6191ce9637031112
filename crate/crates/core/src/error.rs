use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("point ({x1}, {x2}) lies outside the domain")]
    OutsideDomain { x1: f64, x2: f64 },

    #[error("inverse failed: {0}")]
    Inverse(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("solenoid points are incompatible: {0}")]
    Incompatible(String),

    #[error("measure is not normalized (total weight {0})")]
    Unnormalized(f64),

    #[error("budget exhausted before tolerance: {0}")]
    Inconclusive(String),

    #[error("perturbation rejected: {0}")]
    Rejected(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

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

pub type Result<T> = std::result::Result<T, Error>;
