use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hgml_core::Error),

    #[error(transparent)]
    Service(#[from] hgml_service::SetupError),

    #[error(transparent)]
    Client(#[from] hgml_client::ClientError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{what} was built from dataset {found}, but this run holds dataset {expected}")]
    HashMismatch {
        what: String,
        expected: String,
        found: String,
    },

    #[error("{what} was produced with seed {found}, but this run uses seed {expected}")]
    SeedMismatch { what: String, expected: u64, found: u64 },

    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
