use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid size, step count, tolerance or similar setup problem.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Overflow, NaN or a violated stability guard during computation.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("Picard iteration did not converge in {iterations} iterations (last increment {last_increment:.3e}, tolerance {tolerance:.3e})")]
    NonConvergence {
        iterations: usize,
        last_increment: f64,
        tolerance: f64,
        ratios: Vec<f64>,
    },

    /// Malformed checkpoint or config bytes.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
