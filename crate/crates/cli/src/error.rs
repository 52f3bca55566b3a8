use std::fmt;

/// Failure classes, each mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration.
    Config(String),
    /// A library call failed; the message is passed through verbatim.
    Compute(multiples::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(e) if e.is_budget() => 4,
            CliError::Compute(e) if is_input_error(e) => 2,
            CliError::Compute(_) | CliError::Io(_) => 3,
        }
    }
}

/// Library errors that can only come from what the user typed.
fn is_input_error(e: &multiples::Error) -> bool {
    use multiples::Error::*;
    matches!(e, ZeroElement | Parse(_) | InvalidWindow { .. } | InvalidSpec(_) | InvalidArgument(_) | LevelOverflow(_))
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Compute(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<multiples::Error> for CliError {
    fn from(e: multiples::Error) -> Self {
        CliError::Compute(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
