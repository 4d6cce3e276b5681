use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    /// An interior-only operator was applied at a boundary node.
    #[error("node {node:?} is not an interior node")]
    NotInterior { node: Vec<usize> },

    #[error("validation error: {0}")]
    Validation(String),

    /// Bad problem data (mesh size, phase counts, boundary data).
    #[error("problem definition error: {0}")]
    ProblemDefinition(String),

    #[error("boundary data incompatible at node {node:?} (x = {coords:?}): {detail}")]
    BoundaryConflict {
        node: Vec<usize>,
        coords: [f64; 2],
        detail: String,
    },

    #[error("non-finite value produced at iteration {iteration}: {detail}")]
    Numerical { iteration: usize, detail: String },

    /// An iterate broke disjointness or the stability bound.
    #[error("internal consistency breach at iteration {iteration}: {detail}")]
    InternalConsistency { iteration: usize, detail: String },

    #[error("instance too large: {0}")]
    SizeExceeded(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
