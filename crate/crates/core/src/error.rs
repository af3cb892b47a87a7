use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("element {element} is degenerate (length {length})")]
    DegenerateElement { element: usize, length: f64 },

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("model was not produced by a grid generator")]
    UnsupportedModel,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("structure is unstable: stiffness matrix is not positive definite")]
    UnstableStructure,

    #[error("basis system is not statically determinate: {basis_params} basis parameters for {dofs} free DOFs")]
    NotDeterminate { basis_params: usize, dofs: usize },

    #[error("basis system is geometrically unstable (C_b is singular)")]
    BasisUnstable,

    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid material state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("internal error: {0}")]
    Internal(String),
}
