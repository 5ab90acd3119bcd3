use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure reported by a model backend (detector, scorer or segmenter).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    /// The caller violated the backend contract (e.g. a point outside the image).
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The backend itself failed (model runtime, subprocess, malformed response).
    #[error("backend failure: {0}")]
    Failure(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate box ({x_min}, {y_min}, {x_max}, {y_max})")]
    DegenerateBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid prompt set: {0}")]
    PromptSet(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("backend error on image `{image}`: {source}")]
    Backend {
        image: String,
        #[source]
        source: BackendError,
    },

    #[error("segmenter failed on image `{image}` for detection #{detection}: {source}")]
    Segmenter {
        image: String,
        detection: usize,
        #[source]
        source: BackendError,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to parse {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {}: {source}", path.display())]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach the image identity to backend failures raised inside a stage.
    pub fn with_image(self, id: &str) -> Self {
        match self {
            Error::Backend { source, .. } => Error::Backend {
                image: id.to_string(),
                source,
            },
            Error::Segmenter {
                detection, source, ..
            } => Error::Segmenter {
                image: id.to_string(),
                detection,
                source,
            },
            other => other,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
