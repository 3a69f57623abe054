//! Dyadic positive operators on finite grids: mixed-norm evaluation, sparse
//! and Carleson families, disjoint allocations and the testing conditions
//! characterising two-weight bounds `L^p(σ) → L^q_{ℓ^s}(μ)`.

pub mod conditions;
pub mod error;
pub mod grid;
pub mod measure;
pub mod operator;
pub mod sparse;
pub mod suite;
pub mod wolff;

pub use error::{Error, Result};
pub use grid::{CubeId, GridSpec};
pub use measure::{
    DisjointAllocation, FractionalSet, LeafFunction, LeafMeasure, MeasureRole, Rational, Scalar,
};
pub use operator::{CubeCoefficients, CubeVector, ExponentTriple};
