//! Error types shared across the crate.

use thiserror::Error;

/// Reason a vertex condition fails the self-adjointness check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionDefect {
    /// The concatenation (A|B) has rank below the vertex degree.
    RankDeficient,
    /// A·Bᵀ is not symmetric.
    NonSymmetric,
}

impl std::fmt::Display for ConditionDefect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConditionDefect::RankDeficient => write!(f, "rank of (A|B) is below the vertex degree"),
            ConditionDefect::NonSymmetric => write!(f, "A·Bᵀ is not symmetric"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is not connected")]
    DisconnectedGraph,

    #[error("vertex `{vertex}`: condition dimension {condition} does not match degree {degree}")]
    DimensionMismatch {
        vertex: String,
        condition: usize,
        degree: usize,
    },

    #[error("vertex `{vertex}`: invalid condition: {defect}")]
    InvalidCondition {
        vertex: String,
        defect: ConditionDefect,
    },

    #[error("edge `{edge}` references undeclared vertex `{vertex}`")]
    UnknownVertex { edge: String, vertex: String },

    #[error("invalid vertex degree {0}")]
    InvalidDegree(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("edge `{edge}` would get {nodes} interior nodes; at least 3 are required")]
    MeshTooCoarse { edge: String, nodes: usize },

    #[error(
        "vertex `{vertex}`: trace elimination system is numerically singular \
         (condition number {cond:.3e})"
    )]
    SingularTraceSystem { vertex: String, cond: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("flow diverged (non-finite values) at iteration {0}")]
    DivergedFlow(usize),

    #[error("field has zero mass")]
    ZeroMass,

    #[error("mass must be positive, got {0}")]
    NonpositiveMass(f64),

    #[error("frequency too small: {0}")]
    FrequencyTooSmall(String),

    #[error("root finding failed: {0}")]
    RootFindFailure(String),

    #[error("state/graph topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("field length {field} does not match mesh size {mesh}")]
    FieldSizeMismatch { field: usize, mesh: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed graph description: {0}")]
    MalformedGraphFile(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::MalformedGraphFile(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
