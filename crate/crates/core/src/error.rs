use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A stateful mechanism was used after it halted.
    #[error("state violation: {0}")]
    StateViolation(String),

    #[error("infeasible configuration: {0}")]
    InfeasibleConfiguration(String),

    /// Iterative solver ran out of iterations; carries the best iterate found.
    #[error("no convergence after {iterations} iterations")]
    ConvergenceFailure { iterations: usize, best: Vec<f64> },

    #[error("construction failed: {0}")]
    ConstructionFailure(String),

    #[error("malformed input at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(message: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(message.into()))
}
