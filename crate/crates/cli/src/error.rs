use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: unknown key `{key}`")]
    UnknownKey { path: String, line: usize, key: String },
    #[error("{path}:{line}: {message}")]
    Syntax { path: String, line: usize, message: String },
    #[error("scenario `{path}` is missing required key `{key}`")]
    MissingKey { path: String, key: String },
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },
    #[error("cannot read `{}`: {source}", path.display())]
    MissingFile { path: PathBuf, source: std::io::Error },
    #[error("cannot write `{}`: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::UnknownKey { .. } | CliError::Syntax { .. } | CliError::MissingKey { .. } => 3,
            CliError::InvalidParameter { .. } => 4,
            CliError::MissingFile { .. } => 5,
            CliError::Numerical(_) => 6,
            CliError::Write { .. } => 7,
        }
    }

    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::InvalidParameter { key: key.into(), reason: reason.into() }
    }
}

impl From<ruinvest::Error> for CliError {
    fn from(e: ruinvest::Error) -> Self {
        use ruinvest::Error as E;
        match e {
            E::InvalidParameter { name, reason } => CliError::InvalidParameter { key: name.into(), reason },
            E::Unsupported(reason) => CliError::InvalidParameter { key: "scenario".into(), reason },
            other => CliError::Numerical(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
