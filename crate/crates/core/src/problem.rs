//! The conic program `min cᵀx s.t. Ax = b, x ∈ K`, its solutions, and the
//! residual report shared by every solver.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::cones::ConeOps;
use crate::error::{Result, SolverError};
use crate::matrix::DataMatrix;
use crate::subspace::SubspaceProjector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    /// A run of coordinates constrained to be nonnegative.
    NonNeg,
    /// A single second-order cone `{w : w₁ ≥ ‖(w₂,…)‖₂}`.
    Lorentz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub dim: usize,
}

impl ConeBlock {
    pub fn nonneg(dim: usize) -> Self {
        Self {
            kind: ConeKind::NonNeg,
            dim,
        }
    }

    pub fn lorentz(dim: usize) -> Self {
        Self {
            kind: ConeKind::Lorentz,
            dim,
        }
    }
}

/// Ordered product of cone blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeSpec {
    blocks: Vec<ConeBlock>,
    total: usize,
}

impl ConeSpec {
    pub fn new(blocks: Vec<ConeBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(SolverError::EmptyCone("no cone blocks".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.dim == 0 {
                return Err(SolverError::EmptyCone(format!("block {i} has dimension 0")));
            }
            if b.kind == ConeKind::Lorentz && b.dim < 2 {
                return Err(SolverError::EmptyCone(format!(
                    "Lorentz block {i} has dimension {} < 2",
                    b.dim
                )));
            }
        }
        let total = blocks.iter().map(|b| b.dim).sum();
        Ok(Self { blocks, total })
    }

    pub fn nonneg(n: usize) -> Result<Self> {
        Self::new(vec![ConeBlock::nonneg(n)])
    }

    /// `count` Lorentz cones of size `h`.
    pub fn lorentz_product(h: usize, count: usize) -> Result<Self> {
        Self::new(vec![ConeBlock::lorentz(h); count])
    }

    pub fn blocks(&self) -> &[ConeBlock] {
        &self.blocks
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    /// Each block with the coordinate range it occupies.
    pub fn block_ranges(&self) -> impl Iterator<Item = (ConeKind, Range<usize>)> + '_ {
        self.blocks.iter().scan(0usize, |offset, b| {
            let start = *offset;
            *offset += b.dim;
            Some((b.kind, start..start + b.dim))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub a: DataMatrix,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub cones: ConeSpec,
}

impl ConicProgram {
    /// Builds and validates a program.
    pub fn new(
        a: impl Into<DataMatrix>,
        b: DVector<f64>,
        c: DVector<f64>,
        cones: ConeSpec,
    ) -> Result<Self> {
        let program = Self {
            a: a.into(),
            b,
            c,
            cones,
        };
        program.validate()?;
        Ok(program)
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Reports the first violated dimension or finiteness invariant.
    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.a.nrows(), self.a.ncols());
        if m == 0 || n == 0 {
            return Err(SolverError::DimensionMismatch(format!("A is {m}x{n}")));
        }
        if self.b.len() != m {
            return Err(SolverError::DimensionMismatch(format!(
                "A has {m} rows but b has length {}",
                self.b.len()
            )));
        }
        if self.c.len() != n {
            return Err(SolverError::DimensionMismatch(format!(
                "A has {n} columns but c has length {}",
                self.c.len()
            )));
        }
        if self.cones.total_dim() != n {
            return Err(SolverError::DimensionMismatch(format!(
                "cones cover {} coordinates but A has {n} columns",
                self.cones.total_dim()
            )));
        }
        if let Some(index) = self.a.values().iter().position(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteEntry { what: "A", index });
        }
        if let Some(index) = self.b.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteEntry { what: "b", index });
        }
        if let Some(index) = self.c.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteEntry { what: "c", index });
        }
        Ok(())
    }

    pub fn dense_a(&self) -> DMatrix<f64> {
        self.a.to_dense()
    }

    /// Factorizes `A` for projection onto `range(Aᵀ)`.
    pub fn projector(&self) -> Result<SubspaceProjector> {
        SubspaceProjector::build(&self.dense_a())
    }

    /// Applies `Â = DAE`, `b̂ = Db`, `ĉ = Ec`.
    pub fn scaled(&self, row: &DVector<f64>, col: &DVector<f64>) -> ConicProgram {
        ConicProgram {
            a: self.a.scaled(row.as_slice(), col.as_slice()),
            b: self.b.component_mul(row),
            c: self.c.component_mul(col),
            cones: self.cones.clone(),
        }
    }
}

/// Primal/dual pair with objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub y: Option<DVector<f64>>,
    pub primal_obj: f64,
    pub dual_obj: f64,
}

impl Solution {
    /// Fills objectives, the dual objective in the `(A†b)ᵀ(c − z)` form, and
    /// `y` as the least-squares solution of `Aᵀy = c − z`.
    pub fn from_pair(
        program: &ConicProgram,
        projector: &SubspaceProjector,
        x: DVector<f64>,
        z: DVector<f64>,
    ) -> Self {
        let slack = &program.c - &z;
        let dual_obj = projector.pinv_b(&program.b).dot(&slack);
        let y = projector.least_squares_multiplier(&slack);
        Self {
            primal_obj: program.c.dot(&x),
            dual_obj,
            x,
            z,
            y: Some(y),
        }
    }
}

/// Feasibility and optimality measures for a candidate `(x, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    /// `‖Ax − b‖₂`
    pub primal_res: f64,
    /// `‖(I − A†A)(c − z)‖₂`
    pub dual_res: f64,
    /// `|(A†b)ᵀ(c − z) − cᵀx|`
    pub gap: f64,
    pub cone_dist_x: f64,
    pub cone_dist_z: f64,
}

impl ResidualReport {
    /// `max(primal_res, dual_res, gap)`, the scalar plotted in traces.
    pub fn combined(&self) -> f64 {
        self.primal_res.max(self.dual_res).max(self.gap)
    }

    pub fn is_finite(&self) -> bool {
        [
            self.primal_res,
            self.dual_res,
            self.gap,
            self.cone_dist_x,
            self.cone_dist_z,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Evaluates the residual report of `(x, z)` against `program`.
///
/// `projector` must have been built from `program`'s own matrix.
pub fn residuals(
    program: &ConicProgram,
    projector: &SubspaceProjector,
    x: &DVector<f64>,
    z: &DVector<f64>,
) -> ResidualReport {
    let cones = ConeOps::new(program.cones.clone());
    let primal_res = (program.a.mul_vec(x) - &program.b).norm();
    let slack = &program.c - z;
    let dual_res = projector.complement(&slack).norm();
    let gap = (projector.pinv_b(&program.b).dot(&slack) - program.c.dot(x)).abs();
    ResidualReport {
        primal_res,
        dual_res,
        gap,
        cone_dist_x: cones.distance(x),
        cone_dist_z: cones.distance(z),
    }
}
