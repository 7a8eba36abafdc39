//! Douglas-Rachford splitting and ADMM on the split
//! `f = indicator(K)`, `g = cᵀx + indicator(Ax = b)`.

use std::sync::Arc;

use nalgebra::DVector;

use crate::cones::ConeOps;
use crate::error::{Result, SolverError};
use crate::problem::ConicProgram;
use crate::splitting::DIVERGENCE_NORM;
use crate::subspace::SubspaceProjector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    DouglasRachford,
    Admm,
}

/// Proximal map of `g(x) = cᵀx + indicator(Ax = b)` with parameter `mu`:
/// `(I − A†A)(v − μc) + A†b`.
#[derive(Debug, Clone)]
pub struct AffineProx {
    projector: Arc<SubspaceProjector>,
    null_c: DVector<f64>,
    pinv_b: DVector<f64>,
}

impl AffineProx {
    pub fn new(program: &ConicProgram, projector: Arc<SubspaceProjector>) -> Self {
        let null_c = projector.complement_refined(&program.c);
        let pinv_b = projector.pinv_b(&program.b);
        Self {
            projector,
            null_c,
            pinv_b,
        }
    }

    pub fn apply(&self, v: &DVector<f64>, mu: f64) -> DVector<f64> {
        let mut out = self.projector.complement(v);
        out.axpy(-mu, &self.null_c, 1.0);
        out += &self.pinv_b;
        out
    }
}

/// One-shot form of [`AffineProx::apply`].
pub fn prox_affine_linear(
    program: &ConicProgram,
    projector: &Arc<SubspaceProjector>,
    v: &DVector<f64>,
    mu: f64,
) -> DVector<f64> {
    AffineProx::new(program, projector.clone()).apply(v, mu)
}

fn guard(v: &DVector<f64>, iter: usize) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SolverError::NonFinite { iter });
    }
    let norm = v.norm();
    if norm > DIVERGENCE_NORM {
        return Err(SolverError::Diverged { iter, norm });
    }
    Ok(())
}

/// Douglas-Rachford state
///
/// ```text
/// x ← proj_K(w)
/// w ← w + prox_g(2x − w) − x
/// ```
#[derive(Debug, Clone)]
pub struct DouglasRachford {
    w: DVector<f64>,
    x: DVector<f64>,
    mu: f64,
    iter: usize,
    cones: ConeOps,
    prox: AffineProx,
}

impl DouglasRachford {
    /// Zero-initialized.
    pub fn new(program: &ConicProgram, projector: Arc<SubspaceProjector>, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        let n = program.n();
        Ok(Self {
            w: DVector::zeros(n),
            x: DVector::zeros(n),
            mu,
            iter: 0,
            cones: ConeOps::new(program.cones.clone()),
            prox: AffineProx::new(program, projector),
        })
    }

    pub fn step(&mut self) -> Result<()> {
        self.x = self.cones.project(&self.w);
        let reflected = &self.x * 2.0 - &self.w;
        let v = self.prox.apply(&reflected, self.mu);
        self.w += v - &self.x;
        self.iter += 1;
        guard(&self.w, self.iter)
    }

    /// `x = proj_K(w)` and the dual slack `z = (x − w)/μ` of the current `w`.
    pub fn pair(&self) -> (DVector<f64>, DVector<f64>) {
        let x = self.cones.project(&self.w);
        let z = (&x - &self.w) / self.mu;
        (x, z)
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn set_w(&mut self, w: DVector<f64>) {
        self.w = w;
    }

    /// The `x` computed by the last step.
    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn iter(&self) -> usize {
        self.iter
    }
}

/// ADMM state on the consensus form `x₁ = x₂`
///
/// ```text
/// x₁ ← proj_K(x₂ − z/μ)
/// x₂ ← prox_{g/μ}(x₁ + z/μ)
/// z  ← z + μ(x₁ − x₂)
/// ```
#[derive(Debug, Clone)]
pub struct Admm {
    x1: DVector<f64>,
    x2: DVector<f64>,
    z: DVector<f64>,
    mu: f64,
    iter: usize,
    cones: ConeOps,
    prox: AffineProx,
}

impl Admm {
    /// Zero-initialized.
    pub fn new(program: &ConicProgram, projector: Arc<SubspaceProjector>, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        let n = program.n();
        Ok(Self {
            x1: DVector::zeros(n),
            x2: DVector::zeros(n),
            z: DVector::zeros(n),
            mu,
            iter: 0,
            cones: ConeOps::new(program.cones.clone()),
            prox: AffineProx::new(program, projector),
        })
    }

    pub fn step(&mut self) -> Result<()> {
        let inv = 1.0 / self.mu;
        self.x1 = self.cones.project(&(&self.x2 - &self.z * inv));
        self.x2 = self.prox.apply(&(&self.x1 + &self.z * inv), inv);
        self.z += (&self.x1 - &self.x2) * self.mu;
        self.iter += 1;
        guard(&self.z, self.iter)?;
        guard(&self.x2, self.iter)
    }

    /// Reported iterate `x₂` with multiplier `z`.
    pub fn pair(&self) -> (DVector<f64>, DVector<f64>) {
        (self.x2.clone(), self.z.clone())
    }

    pub fn set(&mut self, x2: DVector<f64>, z: DVector<f64>) {
        self.x2 = x2;
        self.z = z;
    }

    pub fn x1(&self) -> &DVector<f64> {
        &self.x1
    }

    pub fn x2(&self) -> &DVector<f64> {
        &self.x2
    }

    pub fn z(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn iter(&self) -> usize {
        self.iter
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(SolverError::InvalidOptions(format!(
            "mu must be positive, got {mu}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ConeBlock, ConeSpec};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn tiny_lp() -> (ConicProgram, Arc<SubspaceProjector>) {
        let p = ConicProgram::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            v(&[1.0]),
            v(&[1.0, 0.0]),
            ConeSpec::nonneg(2).unwrap(),
        )
        .unwrap();
        let proj = Arc::new(p.projector().unwrap());
        (p, proj)
    }

    #[test]
    fn prox_examples() {
        let (p, proj) = tiny_lp();
        assert_relative_eq!(
            prox_affine_linear(&p, &proj, &v(&[0.0, 0.0]), 1.0),
            v(&[0.0, 1.0]),
            epsilon = 1e-15
        );

        let feasible_only = ConicProgram {
            c: v(&[0.0, 0.0]),
            ..p.clone()
        };
        let point = v(&[0.3, 0.7]);
        assert_relative_eq!(
            prox_affine_linear(&feasible_only, &proj, &point, 1.0),
            point,
            epsilon = 1e-15
        );

        let in_range = ConicProgram {
            c: v(&[2.0, 2.0]),
            ..p.clone()
        };
        let pb = proj.pinv_b(&p.b);
        assert_relative_eq!(
            prox_affine_linear(&in_range, &proj, &pb, 3.0),
            pb,
            epsilon = 1e-15
        );
    }

    #[test]
    fn prox_satisfies_constraint() {
        let a = DMatrix::from_fn(3, 6, |i, j| 1.0 / (i + j + 1) as f64);
        let p = ConicProgram::new(
            a.clone(),
            v(&[1.0, -2.0, 0.5]),
            DVector::from_fn(6, |j, _| j as f64 - 2.0),
            ConeSpec::nonneg(6).unwrap(),
        )
        .unwrap();
        let proj = Arc::new(p.projector().unwrap());
        for k in 0..20 {
            let x = DVector::from_fn(6, |j, _| ((j * 11 + k * 7) as f64).cos() * 10.0);
            let out = prox_affine_linear(&p, &proj, &x, 0.5 + k as f64);
            assert!((&a * out - &p.b).norm() <= 1e-10);
        }
    }

    #[test]
    fn dr_first_step() {
        let (p, proj) = tiny_lp();
        let mut dr = DouglasRachford::new(&p, proj, 1.0).unwrap();
        dr.step().unwrap();
        assert_eq!(*dr.x(), v(&[0.0, 0.0]));
        assert_relative_eq!(*dr.w(), v(&[0.0, 1.0]), epsilon = 1e-15);
    }

    #[test]
    fn dr_fixed_point() {
        let (p, proj) = tiny_lp();
        let mut dr = DouglasRachford::new(&p, proj, 1.0).unwrap();
        // proj_K(w) = [0,1], prox_g(2x − w) = prox_g([1,1]) = [0,1]
        let w = v(&[-1.0, 1.0]);
        dr.set_w(w.clone());
        dr.step().unwrap();
        assert!((dr.w() - w).norm() < 1e-15);
        let (x, z) = dr.pair();
        assert_relative_eq!(x, v(&[0.0, 1.0]), epsilon = 1e-15);
        assert_relative_eq!(z, v(&[1.0, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn dr_without_cone_constraints_is_projection() {
        // A "free" cone is approximated by a problem where proj_K is the
        // identity on the starting point: start inside the orthant.
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let p = ConicProgram::new(
            a.clone(),
            v(&[10.0]),
            v(&[0.0, 0.0]),
            ConeSpec::nonneg(2).unwrap(),
        )
        .unwrap();
        let proj = Arc::new(p.projector().unwrap());
        let mut dr = DouglasRachford::new(&p, proj, 1.0).unwrap();
        dr.set_w(v(&[1.0, 1.0]));
        dr.step().unwrap();
        assert!((&a * dr.w() - &p.b).norm() < 1e-13);
    }

    #[test]
    fn admm_first_step() {
        let (p, proj) = tiny_lp();
        let mut admm = Admm::new(&p, proj, 1.0).unwrap();
        admm.step().unwrap();
        assert_eq!(*admm.x1(), v(&[0.0, 0.0]));
        assert_relative_eq!(*admm.x2(), v(&[0.0, 1.0]), epsilon = 1e-15);
        assert_relative_eq!(*admm.z(), v(&[0.0, -1.0]), epsilon = 1e-15);
    }

    #[test]
    fn admm_fixed_point() {
        let (p, proj) = tiny_lp();
        let mut admm = Admm::new(&p, proj, 2.0).unwrap();
        // x₁ = x₂ = x_opt, z equal to the cone dual z_opt
        let (x, z) = (v(&[0.0, 1.0]), v(&[1.0, 0.0]));
        admm.set(x.clone(), z.clone());
        admm.step().unwrap();
        assert!((admm.x1() - &x).norm() < 1e-15);
        assert!((admm.x2() - &x).norm() < 1e-15);
        assert!((admm.z() - &z).norm() < 1e-15);
    }

    #[test]
    fn admm_limit_is_mu_independent() {
        let (p, proj) = tiny_lp();
        let mut objectives = Vec::new();
        for mu in [1.0, 2.0] {
            let mut admm = Admm::new(&p, proj.clone(), mu).unwrap();
            for _ in 0..2000 {
                admm.step().unwrap();
            }
            objectives.push(p.c.dot(admm.x2()));
        }
        assert!((objectives[0] - objectives[1]).abs() < 1e-6);
        assert!(objectives[0].abs() < 1e-6);
    }

    #[test]
    fn lorentz_dr_runs() {
        let spec = ConeSpec::new(vec![ConeBlock::lorentz(3)]).unwrap();
        let p = ConicProgram::new(
            DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
            v(&[1.0]),
            v(&[0.0, 1.0, 0.0]),
            spec,
        )
        .unwrap();
        let proj = Arc::new(p.projector().unwrap());
        let mut dr = DouglasRachford::new(&p, proj, 1.0).unwrap();
        for _ in 0..500 {
            dr.step().unwrap();
        }
        let (x, _) = dr.pair();
        // min x₂ s.t. x₁ = 1, x ∈ K₃ → x = (1, −1, 0)
        assert!((x - v(&[1.0, -1.0, 0.0])).norm() < 1e-6);
    }
}
