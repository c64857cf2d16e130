use thiserror::Error;

/// Errors raised by the graph, inference, and selection layers.
///
/// Node indices carried here are 0-based; the CLI converts them for display.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("connected component {component:?} has no labeled node; its Laplacian block is singular")]
    UnanchoredComponent { component: Vec<usize> },

    #[error("numerical degeneracy at node {node}: pivot {pivot:e} is not above {tolerance:e}")]
    Degenerate {
        node: usize,
        pivot: f64,
        tolerance: f64,
    },

    #[error("exact enumeration needs {unlabeled} unlabeled nodes but the cap is {cap}")]
    Capacity { unlabeled: usize, cap: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
