use thiserror::Error;

/// Errors produced by construction, solving, and learning operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimensions of two inputs do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument is outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// A runtime input (transition, sample, file row) is malformed.
    #[error("invalid input: {0}")]
    Input(String),

    /// A configuration value violates its constraints.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The chain is not ergodic (reducible, absorbing, or otherwise
    /// lacking a unique strictly positive stationary distribution).
    #[error("non-ergodic chain: {0}")]
    NonErgodic(String),

    /// A linear system that must be nonsingular was not.
    #[error("singular system: {0}")]
    Singular(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
