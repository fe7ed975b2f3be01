use thiserror::Error;

/// Crate-wide error type. Every variant maps to a stable machine-parsable
/// code used by the CLI (`error[CODE]: message`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error (line {line}): {msg}")]
    Parse { line: usize, msg: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("model error: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable error code for scripting against the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "E_INVALID",
            Error::Dimension(_) => "E_DIMENSION",
            Error::Parse { .. } => "E_PARSE",
            Error::Geometry(_) => "E_GEOMETRY",
            Error::Numeric(_) => "E_NUMERIC",
            Error::Model(_) => "E_MODEL",
            Error::Io(_) => "E_IO",
            Error::Json(_) => "E_JSON",
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
