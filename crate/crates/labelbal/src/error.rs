//! Crate-wide error type with stable exit-code classes for the CLI.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad argument values or shapes at an API boundary.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Mismatched matrix/vector dimensions.
    #[error("dimension mismatch: {0}")]
    Dim(String),

    /// Bad configuration; `code` is a stable machine-readable identifier
    /// such as `config.cyclic_rules`.
    #[error("{code}: {message}")]
    Config { code: String, message: String },

    /// Numerical failure (divergence, non-finite values, failed factorization).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed data file (CSV/JSON payloads on disk).
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn config(code: &str, message: impl Into<String>) -> Self {
        Error::Config {
            code: code.to_string(),
            message: message.into(),
        }
    }

    /// Process exit code class: 2 config/usage, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Dim(_) | Error::Config { .. } => 2,
            Error::Numeric(_) => 3,
            Error::Io(_) | Error::Parse(_) => 4,
        }
    }

    /// Stable identifier used in the JSON error object printed on stderr.
    pub fn code(&self) -> String {
        match self {
            Error::InvalidInput(_) => "invalid_input".to_string(),
            Error::Dim(_) => "dimension_mismatch".to_string(),
            Error::Config { code, .. } => code.clone(),
            Error::Numeric(_) => "numeric".to_string(),
            Error::Io(_) => "io".to_string(),
            Error::Parse(_) => "parse".to_string(),
        }
    }
}
