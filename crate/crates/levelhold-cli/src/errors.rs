use std::fmt;

/// Process-level failure classes, one per documented exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: unknown or missing keys, malformed or non-finite
    /// values, inconsistent parameter combinations. Exit code 2.
    Usage(String),
    /// The computation left its numerical domain: overflow, divergence,
    /// an unresolvable refinement. Exit code 3.
    Numerical(String),
    /// Reading or writing failed. Exit code 4.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}
