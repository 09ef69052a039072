use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("edge ({u}, {v}) has an endpoint outside 0..{node_count}")]
    EndpointOutOfRange { u: usize, v: usize, node_count: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("{what} has {got} rows, expected {expected}")]
    RowMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("permutation is not a bijection on 0..{0}")]
    NotBijection(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integer overflow computing walk counts (power {power})")]
    Overflow { power: usize },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("gradient requested for a non-scalar output of shape {0:?}")]
    NonScalarOutput([usize; 2]),

    #[error("variable {0} does not belong to this tape")]
    UnknownVar(usize),

    #[error("row {0} has zero norm; cosine similarity is undefined")]
    ZeroNorm(usize),

    #[error("graph6: {0}")]
    Graph6(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
