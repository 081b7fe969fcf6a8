use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A posit or fixed-point format outside the supported parameter space.
    #[error("invalid format: {0}")]
    Format(String),

    #[error("the not-a-real pattern {bits:#b} has no real value")]
    NotAReal { bits: u32 },

    /// An input outside the domain of an operation, such as a non-finite real.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("data error: {0}")]
    Data(String),

    /// Manifest validation failure; `field` is a path such as `blobs[0].tensors[2].shape`.
    #[error("{path}: invalid manifest field `{field}`: {message}")]
    Load {
        path: PathBuf,
        field: String,
        message: String,
    },

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

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid sweep configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
