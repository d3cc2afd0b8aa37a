//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by scene generation, rendering, optimisation and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value violated its documented range or precondition.
    #[error("invalid parameter `{name}`: {message}")]
    Parameter { name: &'static str, message: String },

    /// Two objects that must agree in shape (grid length, image dims,
    /// channel count) do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A scene layout left a class without any pixels.
    #[error("degenerate layout: class `{class}` received no pixels")]
    DegenerateLayout { class: String },

    /// Morphology removed one side of the foreground/background split.
    #[error("degenerate {side} region: empty after morphology")]
    DegenerateRegion { side: &'static str },

    /// A container or table file failed to parse.
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// An I/O failure, annotated with the offending path.
    #[error("i/o error at {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The optimiser produced a non-finite loss or gradient.
    #[error("optimisation diverged at epoch {epoch}: {message}")]
    NonFinite { epoch: usize, message: String },
}

impl Error {
    pub(crate) fn parameter(name: &'static str, message: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn dimension(message: impl Into<String>) -> Self {
        Error::Dimension(message.into())
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
