use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}missing file {}", sample_prefix(.sample_id), path.display())]
    MissingFile { sample_id: Option<String>, path: PathBuf },

    #[error("{}{}: {message}", sample_prefix(.sample_id), path.display())]
    Malformed { sample_id: Option<String>, path: PathBuf, message: String },

    #[error("dataset failed validation with {} violation(s); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidDataset(Vec<Violation>),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: String, expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sample {sample_id}: placed {achieved} of {target} cells after bounded retries")]
    Placement { sample_id: String, achieved: usize, target: usize },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn sample_prefix(sample_id: &Option<String>) -> String {
    match sample_id {
        Some(id) => format!("sample {id}: "),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            return Error::MissingFile { sample_id: None, path: path.into() };
        }
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Attaches a sample id to file-level errors that do not carry one yet.
    pub(crate) fn in_sample(self, id: &str) -> Self {
        match self {
            Error::MissingFile { sample_id: None, path } => {
                Error::MissingFile { sample_id: Some(id.to_string()), path }
            }
            Error::Malformed { sample_id: None, path, message } => {
                Error::Malformed { sample_id: Some(id.to_string()), path, message }
            }
            other => other,
        }
    }
}
