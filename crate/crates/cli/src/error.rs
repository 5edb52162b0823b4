use std::fmt;
use std::path::{Path, PathBuf};

use sideband_core::Error as CoreError;

/// Failure of a command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or an input file that cannot be opened. Exit code 1.
    Usage(String),
    /// Malformed or physically invalid configuration or input data. Exit code 2.
    Config(String),
    /// A calculation or fit that failed or did not converge. Exit code 3.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    /// Wraps a core error raised while reading `path`.
    pub fn in_file(path: &Path, err: CoreError) -> Self {
        match Self::from(err) {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            CliError::Numeric(m) => CliError::Numeric(format!("{}: {m}", path.display())),
        }
    }

    pub fn unreadable(path: &Path, err: std::io::Error) -> Self {
        CliError::Usage(format!("cannot read {}: {err}", path.display()))
    }

    pub fn unwritable(path: PathBuf, err: impl fmt::Display) -> Self {
        CliError::Usage(format!("cannot write {}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, m) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Config(m) => ("config", m),
            CliError::Numeric(m) => ("numeric", m),
        };
        write!(f, "{kind} error: {m}")
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let m = err.to_string();
        match err {
            CoreError::InvalidParameter { .. }
            | CoreError::UnstableTrap { .. }
            | CoreError::UnstableConfiguration(_)
            | CoreError::NoRealRoot { .. }
            | CoreError::BudgetTooSmall { .. }
            | CoreError::Parse { .. }
            | CoreError::Csv(_) => CliError::Config(m),
            CoreError::TruncationLeakage { .. }
            | CoreError::NormDrift { .. }
            | CoreError::Integration(_)
            | CoreError::InsufficientData(_) => CliError::Numeric(m),
            CoreError::Io(_) => CliError::Usage(m),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
