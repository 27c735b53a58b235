use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("aliasing error: {0}")]
    Aliasing(String),
    #[error("truncation error: {0}")]
    Truncation(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Json(_) => 2,
            Error::Resolution(_) | Error::Aliasing(_) | Error::Truncation(_) | Error::Range(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
