//! The splitting iteration
//!
//! ```text
//! p ← abs_K(s)
//! r ← abs_𝒜(p)
//! s ← s/2 − r/2 + d
//! ```
//!
//! with `d = A†b + μ/2·(abs_𝒜(c) − c)`. The iterate `s` encodes the pair
//! `x = proj_K(s)`, `z = (proj_K(s) − s)/μ`. When a diagonal scaling `O` is
//! installed the same iteration runs on `(AO, b, Oc)` and pairs are mapped
//! back through `x = O x̂`, `z = O⁻¹ ẑ`.

use std::sync::Arc;

use nalgebra::DVector;

use crate::cones::ConeOps;
use crate::error::{Result, SolverError};
use crate::problem::{ConicProgram, Solution};
use crate::subspace::SubspaceProjector;

/// `‖s‖` above this aborts the solve.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            primal: tol,
            dual: tol,
            gap: tol,
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::uniform(1e-8)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialPoint {
    #[default]
    Zero,
    /// `s = x − μz`
    WarmStart { x: DVector<f64>, z: DVector<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub mu: f64,
    pub max_iters: usize,
    pub tol: Tolerances,
    /// Record every `trace_stride`-th iteration.
    pub trace_stride: usize,
    pub initial: InitialPoint,
    pub max_seconds: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            mu: 1.0,
            max_iters: 100_000,
            tol: Tolerances::default(),
            trace_stride: 1,
            initial: InitialPoint::Zero,
            max_seconds: None,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(SolverError::InvalidOptions(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidOptions(
                "max_iters must be at least 1".into(),
            ));
        }
        let t = self.tol;
        if !(t.primal > 0.0 && t.dual > 0.0 && t.gap > 0.0) {
            return Err(SolverError::InvalidOptions(
                "tolerances must be positive".into(),
            ));
        }
        if self.trace_stride == 0 {
            return Err(SolverError::InvalidOptions(
                "trace stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `d = (AO)†b − μ(I − P̂)(Oc)`, equal to `(AO)†b + μ/2·(abs_𝒜̂(Oc) − Oc)`.
pub fn compute_d(
    projector: &SubspaceProjector,
    b: &DVector<f64>,
    scaled_c: &DVector<f64>,
    mu: f64,
) -> DVector<f64> {
    let mut d = projector.pinv_b(b);
    d.axpy(-mu, &projector.complement_refined(scaled_c), 1.0);
    d
}

/// Iteration state. Vectors `s`, `p`, `r`, `d` live in the scaled space.
#[derive(Debug, Clone)]
pub struct SplittingState {
    s: DVector<f64>,
    p: DVector<f64>,
    r: DVector<f64>,
    d: DVector<f64>,
    mu: f64,
    iter: usize,
    projector: Arc<SubspaceProjector>,
    cones: ConeOps,
    scale: DVector<f64>,
}

impl SplittingState {
    /// Unscaled state. `projector` must be built from `program`'s matrix.
    pub fn init(
        program: &ConicProgram,
        projector: Arc<SubspaceProjector>,
        options: &SolveOptions,
    ) -> Result<Self> {
        options.validate()?;
        let n = program.n();
        if projector.dim() != n || projector.rows() != program.m() {
            return Err(SolverError::DimensionMismatch(
                "projector does not match program".into(),
            ));
        }
        let mu = options.mu;
        let d = compute_d(&projector, &program.b, &program.c, mu);
        let s = match &options.initial {
            InitialPoint::Zero => DVector::zeros(n),
            InitialPoint::WarmStart { x, z } => {
                if x.len() != n || z.len() != n {
                    return Err(SolverError::DimensionMismatch(
                        "warm start has wrong length".into(),
                    ));
                }
                x - z * mu
            }
        };
        let cones = ConeOps::new(program.cones.clone());
        let p = cones.abs_cone(&s);
        Ok(Self {
            s,
            p,
            r: DVector::zeros(n),
            d,
            mu,
            iter: 0,
            projector,
            cones,
            scale: DVector::from_element(n, 1.0),
        })
    }

    /// Replaces projector, scaling, `d` and `s` (used by reconditioning).
    pub(crate) fn install(
        &mut self,
        projector: Arc<SubspaceProjector>,
        cones: ConeOps,
        scale: DVector<f64>,
        d: DVector<f64>,
        s: DVector<f64>,
    ) {
        self.p = cones.abs_cone(&s);
        self.projector = projector;
        self.cones = cones;
        self.scale = scale;
        self.d = d;
        self.s = s;
    }

    /// One pass of `p ← abs_K(s); r ← abs_𝒜(p); s ← s/2 − r/2 + d`.
    pub fn step(&mut self) -> Result<()> {
        self.p.copy_from(&self.s);
        self.cones.abs_in_place(self.p.as_mut_slice());
        self.r = self.projector.abs_subspace(&self.p);
        for ((s, r), d) in self.s.iter_mut().zip(self.r.iter()).zip(self.d.iter()) {
            *s = 0.5 * *s - 0.5 * r + d;
        }
        self.iter += 1;
        if self.s.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { iter: self.iter });
        }
        let norm = self.s.norm();
        if norm > DIVERGENCE_NORM {
            return Err(SolverError::Diverged {
                iter: self.iter,
                norm,
            });
        }
        Ok(())
    }

    /// Moreau pair of the current `s`, mapped to the original space:
    /// `x = O·proj_K(s)`, `z = O⁻¹(proj_K(s) − s)/μ`. Both lie in `K` and are
    /// orthogonal.
    pub fn extract_pair(&self) -> (DVector<f64>, DVector<f64>) {
        let proj = self.cones.project(&self.s);
        let z = DVector::from_fn(self.s.len(), |j, _| {
            (proj[j] - self.s[j]) / (self.mu * self.scale[j])
        });
        let x = proj.component_mul(&self.scale);
        (x, z)
    }

    /// Pair formed from the last step's `p` and the current `s`:
    /// `x = O(p + s)/2`, `z = O⁻¹(p − s)/(2μ)`.
    ///
    /// Unlike [`extract_pair`](Self::extract_pair) these are not exactly
    /// complementary before convergence, and their elementwise ratio is what
    /// adaptive conditioning reads.
    pub fn iterate_pair(&self) -> (DVector<f64>, DVector<f64>) {
        let n = self.s.len();
        let x = DVector::from_fn(n, |j, _| self.scale[j] * 0.5 * (self.p[j] + self.s[j]));
        let z = DVector::from_fn(n, |j, _| {
            (self.p[j] - self.s[j]) / (2.0 * self.mu * self.scale[j])
        });
        (x, z)
    }

    /// Solution with objectives evaluated on the original program.
    pub fn extract(&self, program: &ConicProgram, original: &SubspaceProjector) -> Solution {
        let (x, z) = self.extract_pair();
        Solution::from_pair(program, original, x, z)
    }

    /// `|u|⋆ = abs_𝒜(abs_K(u))` in the current space.
    pub fn star_abs(&self, u: &DVector<f64>) -> DVector<f64> {
        self.projector.abs_subspace(&self.cones.abs_cone(u))
    }

    /// `‖d − (s + |s|⋆)/2‖₂`; zero exactly at fixed points.
    pub fn fixed_point_residual(&self, s_candidate: &DVector<f64>) -> f64 {
        let star = self.star_abs(s_candidate);
        DVector::from_fn(self.d.len(), |j, _| {
            self.d[j] - 0.5 * (s_candidate[j] + star[j])
        })
        .norm()
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn set_s(&mut self, s: DVector<f64>) {
        assert_eq!(s.len(), self.s.len());
        self.p = self.cones.abs_cone(&s);
        self.s = s;
    }

    pub fn p(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn scale(&self) -> &DVector<f64> {
        &self.scale
    }

    pub fn cones(&self) -> &ConeOps {
        &self.cones
    }

    pub fn projector(&self) -> &Arc<SubspaceProjector> {
        &self.projector
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ConeSpec;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn tiny_lp() -> ConicProgram {
        ConicProgram::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            v(&[1.0]),
            v(&[1.0, 0.0]),
            ConeSpec::nonneg(2).unwrap(),
        )
        .unwrap()
    }

    fn state(p: &ConicProgram) -> SplittingState {
        SplittingState::init(
            p,
            Arc::new(p.projector().unwrap()),
            &SolveOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn init_computes_d() {
        // A†b = [0.5, 0.5], abs_𝒜(c) = [0, 1], d = [0.5,0.5] + 0.5·([0,1] − [1,0])
        let st = state(&tiny_lp());
        assert_relative_eq!(*st.d(), v(&[0.0, 1.0]), epsilon = 1e-15);
        assert_eq!(*st.s(), v(&[0.0, 0.0]));
    }

    #[test]
    fn d_vanishes_for_zero_data() {
        let p = ConicProgram::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            v(&[0.0]),
            v(&[0.0, 0.0]),
            ConeSpec::nonneg(2).unwrap(),
        )
        .unwrap();
        let mut st = state(&p);
        assert_eq!(st.d().norm(), 0.0);
        st.step().unwrap();
        assert_eq!(st.s().norm(), 0.0);
        let (x, z) = st.extract_pair();
        assert_eq!(x.norm() + z.norm(), 0.0);
    }

    #[test]
    fn d_equals_pinv_b_when_c_in_row_space() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5]);
        let c = a.row(0).transpose() * 3.0;
        let p = ConicProgram::new(a, v(&[2.0]), c, ConeSpec::nonneg(3).unwrap()).unwrap();
        let st = state(&p);
        let pinv_b = st.projector().pinv_b(&p.b);
        assert!((st.d() - pinv_b).norm() < 1e-14);
    }

    #[test]
    fn hand_executed_steps() {
        let mut st = state(&tiny_lp());
        st.step().unwrap();
        assert_relative_eq!(*st.s(), v(&[0.0, 1.0]), epsilon = 1e-15);
        st.step().unwrap();
        // p = [0,1], r = 2·[0.5,0.5] − [0,1] = [1,0], s = [0,0.5] − [0.5,0] + [0,1]
        assert_relative_eq!(*st.s(), v(&[-0.5, 1.5]), epsilon = 1e-15);
        assert_eq!(st.iter(), 2);
    }

    #[test]
    fn optimum_is_fixed_point() {
        let p = tiny_lp();
        let mut st = state(&p);
        // x_opt = [0,1], z_opt = [1,0], s_opt = x − μz
        let s_opt = v(&[-1.0, 1.0]);
        assert!(st.fixed_point_residual(&s_opt) <= 1e-12);
        st.set_s(s_opt.clone());
        st.step().unwrap();
        assert!((st.s() - &s_opt).norm() <= 1e-12);
        let (x, z) = st.extract_pair();
        assert_relative_eq!(x, v(&[0.0, 1.0]), epsilon = 1e-12);
        assert_relative_eq!(z, v(&[1.0, 0.0]), epsilon = 1e-12);

        let perturbed = v(&[-1.0 + 1e-3, 1.0]);
        assert!(st.fixed_point_residual(&perturbed) > 1e-6);
    }

    #[test]
    fn warm_start_sets_s() {
        let p = tiny_lp();
        let opts = SolveOptions {
            mu: 2.0,
            initial: InitialPoint::WarmStart {
                x: v(&[0.0, 1.0]),
                z: v(&[1.0, 0.0]),
            },
            ..SolveOptions::default()
        };
        let st = SplittingState::init(&p, Arc::new(p.projector().unwrap()), &opts).unwrap();
        assert_eq!(*st.s(), v(&[-2.0, 1.0]));
    }

    #[test]
    fn tiny_lp_converges() {
        let p = tiny_lp();
        let mut st = state(&p);
        for _ in 0..200 {
            st.step().unwrap();
        }
        let (x, z) = st.extract_pair();
        assert!((x - v(&[0.0, 1.0])).norm() < 1e-10);
        assert!((z - v(&[1.0, 0.0])).norm() < 1e-10);
    }

    #[test]
    fn infeasible_program_diverges_loudly() {
        // x₁ + x₂ = −10⁹ with x ≥ 0 has no solution; the iterate drifts linearly
        let p = ConicProgram::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            v(&[-1e9]),
            v(&[1.0, 1.0]),
            ConeSpec::nonneg(2).unwrap(),
        )
        .unwrap();
        let mut st = state(&p);
        let err = (0..1_000_000).find_map(|_| st.step().err());
        assert!(matches!(err, Some(SolverError::Diverged { .. })), "{err:?}");
    }

    #[test]
    fn options_are_validated() {
        assert!(SolveOptions {
            mu: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolveOptions {
            max_iters: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolveOptions {
            tol: Tolerances::uniform(0.0),
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolveOptions::default().validate().is_ok());
    }
}
