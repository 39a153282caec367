use thiserror::Error;

/// Errors raised by the discretization, estimation and driver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no exact solution configured")]
    NoExactSolution,
    #[error("coercivity violated: coefficient value {0} is not positive")]
    CoercivityViolated(f64),
    #[error("incompatible mesh trees (max depth {0} vs {1})")]
    IncompatibleMeshTrees(u32, u32),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("coefficient breakpoint {0} is not a vertex of the mesh")]
    CoefficientNotAligned(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid time partition: {0}")]
    InvalidPartition(String),
    #[error("slab solve failed on slab {0}")]
    SlabSolveFailed(usize),
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("reference space must refine slab space")]
    ReferenceNotRefining,
    #[error("load not representable: {0}")]
    LoadNotRepresentable(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
