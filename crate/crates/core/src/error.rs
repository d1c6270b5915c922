use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    Domain(String),

    #[error("argument {x} lies beyond the solved range [0, {x_max}]")]
    Extrapolation { x: f64, x_max: f64 },

    #[error("point ({x}, {y}) is outside the strip [0, inf) x [-1, 1]")]
    OutsideStrip { x: f64, y: f64 },

    #[error("ODE integration failed at x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("resource limit exceeded: {0}")]
    Limit(String),

    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
