//! Conic programs `min cᵀx s.t. Ax = b, x ∈ K` solved by a fixed-point
//! splitting iteration on a single vector, with adaptive diagonal
//! conditioning and Douglas-Rachford, ADMM and Sinkhorn-Knopp baselines.
//!
//! `K` is a product of nonnegative orthants and second-order (Lorentz) cones.

pub mod baselines;
pub mod conditioning;
pub mod cones;
pub mod driver;
pub mod error;
pub mod generators;
pub mod io;
pub mod matrix;
pub mod problem;
pub mod splitting;
pub mod subspace;

pub use conditioning::{ConditioningPolicy, Schedule};
pub use cones::ConeOps;
pub use driver::{
    solve, solve_observed, Algorithm, Preconditioner, RunSettings, SolveReport, Status, StopRule,
    TraceRecord,
};
pub use error::{Result, SolverError};
pub use matrix::{CsrMatrix, DataMatrix};
pub use problem::{
    residuals, ConeBlock, ConeKind, ConeSpec, ConicProgram, ResidualReport, Solution,
};
pub use splitting::{InitialPoint, SolveOptions, SplittingState, Tolerances};
pub use subspace::SubspaceProjector;
