use thiserror::Error;

/// Every failure mode of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("metric violation: {0}")]
    MetricViolation(String),
    #[error("infeasible input: {0}")]
    InfeasibleInput(String),
    #[error("LP is unbounded")]
    Unbounded,
    #[error("separation loop exceeded {0} rounds")]
    IterationLimit(usize),
    #[error("support is disconnected; component {component:?}")]
    DisconnectedSupport { component: Vec<usize> },
    #[error("too large: {0}")]
    TooLarge(String),
    #[error("lambda fit stalled after {iterations} iterations (best deviation {best_deviation:e})")]
    NoConvergence { iterations: usize, best_deviation: f64 },
    #[error("singular Laplacian: {0}")]
    SingularLaplacian(String),
    #[error("odd set has {size} vertices, cap is {cap}")]
    TooManyOdd { size: usize, cap: usize },
    #[error("no polygon arrangement: {0}")]
    NoArrangement(String),
    #[error("chain violation: {0}")]
    ChainViolation(String),
    #[error("structure violation: {0}")]
    StructureViolation(String),
    #[error("hierarchy violation: {0}")]
    HierarchyViolation(String),
    #[error("no cut-to-edge-group mapping: {0}")]
    MappingUnavailable(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
