use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("negative weight {weight} on edge ({i}, {j})")]
    NegativeWeight { i: usize, j: usize, weight: f64 },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("backward already ran on this tape; reset it first")]
    BackwardTwice,

    #[error("backward requires a 1x1 loss, got {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },

    #[error("graph has {n} nodes, above the oracle limit of {limit}")]
    SizeLimit { n: usize, limit: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("A_M identically zero: graph contains no motif instances")]
    ZeroMotifAdjacency,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("missing required file {0}")]
    MissingFile(PathBuf),

    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),

    #[error("generator failed: {0}")]
    Generator(String),

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("empty {0} split")]
    EmptySplit(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by bad input data rather than numerics or programming.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::IndexOutOfRange { .. }
                | Error::NegativeWeight { .. }
                | Error::SizeLimit { .. }
                | Error::ZeroMotifAdjacency
                | Error::Parse { .. }
                | Error::MissingFile(_)
                | Error::Inconsistent(_)
                | Error::Generator(_)
                | Error::EmptySplit(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::NonFiniteLoss { .. } | Error::Eigen(_)
        )
    }
}
