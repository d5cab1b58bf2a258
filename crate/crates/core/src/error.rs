use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain of an operation (bad string, fret, index).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed interchange document.
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    /// Well-formed input that violates an invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Two tensors or matrices that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A persisted file could not be decoded.
    #[error("format error: {0}")]
    Format(String),

    /// Non-finite values showed up during a numerical computation.
    #[error("numerical failure in {layer}: {message}")]
    Numerical { layer: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn numerical(layer: &str, message: impl Into<String>) -> Self {
        Error::Numerical {
            layer: layer.to_string(),
            message: message.into(),
        }
    }

    /// True for failures caused by the numbers themselves rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
