use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("empty matrix ({rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("malformed network: {0}")]
    MalformedNet(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("parameter regime violated: {0}")]
    Regime(String),

    #[error("resource cap exceeded: {what} needs {needed}, cap is {cap}")]
    ResourceCap {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    #[error("infeasible budget: {0}")]
    Infeasible(String),

    #[error("derivative oracle failed for multi-index {index:?}: {reason}")]
    Oracle { index: Vec<usize>, reason: String },

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("all probe pairs are degenerate (x == y)")]
    DegeneratePairs,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
