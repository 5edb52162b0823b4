use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unstable trap: ν_c²/4 − ν_z²/2 = {radicand:.6e} Hz² is negative")]
    UnstableTrap { radicand: f64 },

    #[error("unstable crystal configuration: {0}")]
    UnstableConfiguration(String),

    #[error("no real rotation frequency reproduces a tilt frequency of {tilt_hz} Hz")]
    NoRealRoot { tilt_hz: f64 },

    #[error("truncation leakage {leakage:.3e} exceeds tolerance {tolerance:.1e}")]
    TruncationLeakage { leakage: f64, tolerance: f64 },

    #[error("state norm drifted by {drift:.3e} (tolerance {tolerance:.1e})")]
    NormDrift { drift: f64, tolerance: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no pulse fits in a budget of {budget_s} s")]
    BudgetTooSmall { budget_s: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }
}
