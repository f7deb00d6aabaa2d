use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("partitioning error: {0}")]
    Partition(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("invalid block layout: {0}")]
    Layout(String),

    #[error("curvature must be positive, got {0}")]
    Curvature(f64),

    #[error("degenerate row {row}: squared norm is zero")]
    DegenerateRow { row: usize },

    #[error("strong convexity constants sum to zero")]
    StrongConvexity,

    #[error("enumeration budget exceeded: {outcomes} outcomes > {budget}")]
    Budget { outcomes: u128, budget: u128 },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("residual drift {drift:e} at iteration {iteration} on node {node} exceeds {limit:e}")]
    ResidualDrift {
        iteration: u64,
        node: usize,
        drift: f64,
        limit: f64,
    },

    #[error("divergence at iteration {iteration}: objective is {value}")]
    Divergence { iteration: u64, value: f64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
