//! Orthogonal projection onto `range(Aᵀ)` and the pseudo-inverse `A†`.
//!
//! Built from a thin Householder QR of `Aᵀ = QR`, so that
//! `A†A = QQᵀ` and `A†w = QR⁻ᵀw`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SolverError};

/// Singular values below `RANK_TOLERANCE · σ_max` count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SubspaceProjector {
    a: DMatrix<f64>,
    /// n×m, orthonormal columns spanning range(Aᵀ)
    q: DMatrix<f64>,
    /// m×m upper triangular
    r: DMatrix<f64>,
    sigma_max: f64,
    sigma_min: f64,
}

impl SubspaceProjector {
    /// Factorizes `a` (m×n). Fails unless `a` has full row rank `m`.
    pub fn build(a: &DMatrix<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        if let Some(index) = a.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteEntry { what: "A", index });
        }
        if m == 0 || n == 0 {
            return Err(SolverError::DimensionMismatch(format!("A is {m}x{n}")));
        }
        if m > n {
            return Err(SolverError::RankDeficient {
                rank: n.min(numerical_rank(a)),
                rows: m,
            });
        }
        let qr = a.transpose().qr();
        let q = qr.q();
        let r = qr.r();
        let sv = r.singular_values();
        let sigma_max = sv.max();
        let sigma_min = sv.min();
        let rank = sv
            .iter()
            .filter(|&&s| s > RANK_TOLERANCE * sigma_max)
            .count();
        if sigma_max == 0.0 || rank < m {
            return Err(SolverError::RankDeficient {
                rank: if sigma_max == 0.0 { 0 } else { rank },
                rows: m,
            });
        }
        Ok(Self {
            a: a.clone(),
            q,
            r,
            sigma_max,
            sigma_min,
        })
    }

    /// The matrix this projector was built from.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// `σ_max / σ_min` of the factored matrix.
    pub fn condition_number(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }

    /// `A†A v`, the projection onto `range(Aᵀ)`.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.q * self.q.tr_mul(v)
    }

    /// `(I − A†A) v`, the projection onto `null(A)`.
    pub fn complement(&self, v: &DVector<f64>) -> DVector<f64> {
        v - self.project(v)
    }

    /// Null-space projection with a second orthogonalization pass. The extra
    /// pass strips the range component left by cancellation when `v` is large
    /// and mostly in `range(Aᵀ)`.
    pub fn complement_refined(&self, v: &DVector<f64>) -> DVector<f64> {
        let once = self.complement(v);
        self.complement(&once)
    }

    /// `abs_𝒜(v) = 2·A†A v − v`.
    pub fn abs_subspace(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = self.project(v);
        out *= 2.0;
        out -= v;
        out
    }

    /// `A†w`, the minimum-norm solution of `Ax = w`.
    pub fn pinv_b(&self, w: &DVector<f64>) -> DVector<f64> {
        let t = self
            .r
            .tr_solve_upper_triangular(w)
            .expect("R is nonsingular after the rank check");
        &self.q * t
    }

    /// Least-squares `y` for `Aᵀy = v`.
    pub fn least_squares_multiplier(&self, v: &DVector<f64>) -> DVector<f64> {
        let qtv = self.q.tr_mul(v);
        self.r
            .solve_upper_triangular(&qtv)
            .expect("R is nonsingular after the rank check")
    }

    /// Projector for the column-scaled matrix `A·diag(o)`. The original is left untouched.
    pub fn refresh(&self, o: &DVector<f64>) -> Result<Self> {
        if o.len() != self.dim() {
            return Err(SolverError::DimensionMismatch(format!(
                "scaling has length {} but A has {} columns",
                o.len(),
                self.dim()
            )));
        }
        if let Some(j) = o.iter().position(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(SolverError::InvalidOptions(format!(
                "scaling entry {j} is not positive"
            )));
        }
        let scaled = DMatrix::from_fn(self.rows(), self.dim(), |i, j| self.a[(i, j)] * o[j]);
        Self::build(&scaled)
    }
}

/// `σ_max / σ_min` of a general matrix, via its singular values.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    sv.max() / sv.min()
}

/// Number of singular values above the rank tolerance.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let sv = a.singular_values();
    let max = sv.max();
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
}
