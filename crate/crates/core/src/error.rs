//! Error types shared across the solver modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or inconsistent model configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Problem size exceeds a configured dimension or term budget.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Numerical failure (step-size underflow, non-convergence, empty jump).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
