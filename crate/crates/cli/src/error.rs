use std::fmt;

use robust_dpsco::Error;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Exit 1.
    Invariant(String),
    /// Exit 2.
    Usage(String),
    /// Exit 3.
    Infeasible(String),
    /// Exit 1, for downstream failures that are neither of the above.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) | CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }

    /// Maps a library error raised inside `module`.
    pub fn from_core(module: &str, err: Error) -> Self {
        match err {
            Error::InfeasibleConfiguration(m) => CliError::Infeasible(format!("{module}: {m}")),
            Error::InvalidArgument(m) => CliError::Usage(format!("{module}: {m}")),
            other => CliError::Runtime(format!("{module}: {other}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invariant(m) => write!(f, "invariant violation: {m}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible configuration: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
