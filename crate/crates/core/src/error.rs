use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid bounds at coordinate {index}: lower {lower} > upper {upper}")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },

    #[error("point is infeasible at coordinate {index}: {value} not in [{lower}, {upper}]")]
    Infeasible {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("nodes {0} and {1} share a colour but are coupled")]
    ColourConflict(usize, usize),

    #[error("block ({0}, {1}) is outside the declared sparsity pattern")]
    PatternViolation(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("backtracking exceeded {max_backtracks} halvings at node {node}")]
    BacktrackingFailed { node: usize, max_backtracks: usize },

    #[error("non-finite objective at iteration {iteration}")]
    NonFiniteObjective { iteration: usize, x: Vec<f64> },

    #[error("refinement returned no model decrease at iteration {iteration} (criticality {criticality:e})")]
    NoModelDecrease { iteration: usize, criticality: f64 },

    #[error("exchange between nodes {0} and {1} does not follow a coupling edge")]
    NonLocalExchange(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;
