use thiserror::Error;

use crate::grid::CubeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid cube: {0}")]
    InvalidCube(String),
    #[error("length mismatch: expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("invalid exponents: {0}")]
    InvalidExponents(String),
    #[error("cube {0} has zero mass")]
    ZeroMassCube(CubeId),
    #[error("set has zero mass")]
    EmptySet,
    #[error("requested mass {requested} exceeds available mass {available}")]
    MassUnavailable { requested: f64, available: f64 },
    #[error("allocation infeasible at cube {0}")]
    Infeasible(CubeId),
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("no family cube contains {0}")]
    NotCovered(CubeId),
    #[error("term for family cube {0} has zero denominator and nonzero numerator")]
    DegenerateTerm(CubeId),
    #[error("all weights are zero")]
    ZeroDenominator,
    #[error("allocation overlaps on leaf {leaf}: total fraction {total}")]
    OverlappingAllocation { leaf: usize, total: f64 },
    #[error("measure is identically zero")]
    ZeroMeasure,
    #[error("function is identically zero")]
    ZeroFunction,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
