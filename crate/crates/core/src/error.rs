use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent model, optimizer or experiment settings.
    #[error("configuration error: {0}")]
    Config(String),
    /// Targets or features that violate a task's contract.
    #[error("data error: {0}")]
    Data(String),
    /// CSV header does not match the declared schema.
    #[error("schema error: {0}")]
    Schema(String),
    /// Non-finite values encountered during training or evaluation.
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input (config, schema, data) rather
    /// than by the run itself.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Data(_) | Error::Schema(_) | Error::Toml(_)
        )
    }
}
