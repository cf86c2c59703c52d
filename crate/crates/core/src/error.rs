use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge ({u}, {v}) has an endpoint outside 0..{node_count}")]
    EndpointOutOfRange {
        u: usize,
        v: usize,
        node_count: usize,
    },

    #[error("self-loop ({0}, {0}) is not allowed in a simple graph")]
    SelfLoop(usize),

    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("graph id {id} appears in the {present_in} file but not in the {missing_from} file")]
    UnmatchedId {
        id: u64,
        present_in: &'static str,
        missing_from: &'static str,
    },

    #[error("graph {0} has an empty edge list")]
    EmptyEdgeList(u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("pagerank did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("graph has no non-edges to sample from")]
    NoNonEdges,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("input contains a single class; both classes are required")]
    SingleClass,

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("unknown classifier architecture {0} (expected 1..=4)")]
    UnknownArchitecture(u8),

    #[error("backward called before forward")]
    BackwardBeforeForward,

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
