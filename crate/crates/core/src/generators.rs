//! Reproducible random LP/SOCP instances and the bundled 3×5 example.
//!
//! Randomness comes from ChaCha20 seeded with the user seed. Each array is
//! drawn from its own stream so the instance layout does not depend on draw
//! order:
//!
//! | stream | array |
//! |--------|-------|
//! | 0      | `A`, row-major |
//! | 1      | generating point `ẋ` |
//! | 2      | `c` |
//!
//! A uniform sample is `(k + 0.5)·2⁻⁵³` with `k` the top 53 bits of the next
//! `u64`, so it lies strictly inside `(0, 1)`. Normals use the inverse CDF of
//! that sample.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cones::ConeOps;
use crate::error::{Result, SolverError};
use crate::problem::{ConeSpec, ConicProgram};

const STREAM_A: u64 = 0;
const STREAM_POINT: u64 = 1;
const STREAM_C: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `A`, `c` standard normal; `b = Aẋ` with `ẋ ~ U[0,1]`.
    LpNormal,
    /// `A ~ U[−1,1]`, `c` standard normal; `b = A|ẋ|` with `ẋ` standard normal.
    LpUniform,
    /// `A ~ U[−1,1]`, `c ~ U[0,1]`; `b = A·abs_K(ẋ)` with `ẋ ~ U[0,1]`, `K = (K_h)^{n/h}`.
    Socp,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::LpNormal => "lp-normal",
            Family::LpUniform => "lp-uniform",
            Family::Socp => "socp",
        })
    }
}

impl FromStr for Family {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp-normal" => Ok(Family::LpNormal),
            "lp-uniform" => Ok(Family::LpUniform),
            "socp" => Ok(Family::Socp),
            _ => Err(SolverError::InvalidOptions(format!("unknown family '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub family: Family,
    pub n: usize,
    /// Defaults to `⌊0.8n⌋`.
    pub m: Option<usize>,
    /// Lorentz block size for [`Family::Socp`].
    pub cone_size: usize,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        Self {
            family,
            n,
            m: None,
            cone_size: 4,
            seed,
        }
    }

    pub fn rows(&self) -> usize {
        self.m.unwrap_or(self.n * 4 / 5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(SolverError::InvalidOptions(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        let m = self.rows();
        if m == 0 || m > self.n {
            return Err(SolverError::InvalidOptions(format!(
                "m must lie in 1..={}, got {m}",
                self.n
            )));
        }
        if self.family == Family::Socp {
            if self.cone_size < 2 {
                return Err(SolverError::InvalidOptions(
                    "cone size must be at least 2".into(),
                ));
            }
            if !self.n.is_multiple_of(self.cone_size) {
                return Err(SolverError::IndivisibleConeSize {
                    n: self.n,
                    h: self.cone_size,
                });
            }
        }
        Ok(())
    }
}

struct Stream(ChaCha20Rng);

impl Stream {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Stream(rng)
    }

    /// Strictly inside (0, 1).
    fn unit(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    fn sample(&mut self, dist: Dist, normal: &Normal) -> f64 {
        match dist {
            Dist::Normal => normal.inverse_cdf(self.unit()),
            Dist::Uniform(lo, hi) => self.uniform(lo, hi),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Dist {
    Normal,
    Uniform(f64, f64),
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Returns the instance together with the feasible point it was built from.
pub fn generate(spec: &GenSpec) -> Result<(ConicProgram, DVector<f64>)> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.rows());
    let normal = standard_normal();
    let mut sa = Stream::new(spec.seed, STREAM_A);
    let mut sx = Stream::new(spec.seed, STREAM_POINT);
    let mut sc = Stream::new(spec.seed, STREAM_C);

    let (a_dist, point_dist, c_dist) = match spec.family {
        Family::LpNormal => (Dist::Normal, Dist::Uniform(0.0, 1.0), Dist::Normal),
        Family::LpUniform => (Dist::Uniform(-1.0, 1.0), Dist::Normal, Dist::Normal),
        Family::Socp => (
            Dist::Uniform(-1.0, 1.0),
            Dist::Uniform(0.0, 1.0),
            Dist::Uniform(0.0, 1.0),
        ),
    };

    let mut a = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = sa.sample(a_dist, &normal);
        }
    }
    let point = DVector::from_fn(n, |_, _| sx.sample(point_dist, &normal));
    let c = DVector::from_fn(n, |_, _| sc.sample(c_dist, &normal));

    let (cones, x0) = match spec.family {
        Family::LpNormal => (ConeSpec::nonneg(n)?, point),
        Family::LpUniform => (ConeSpec::nonneg(n)?, point.abs()),
        Family::Socp => {
            let cones = ConeSpec::lorentz_product(spec.cone_size, n / spec.cone_size)?;
            let x0 = ConeOps::new(cones.clone()).abs_cone(&point);
            (cones, x0)
        }
    };
    let b = &a * &x0;
    Ok((ConicProgram::new(a, b, c, cones)?, x0))
}

pub fn gen_lp(spec: &GenSpec) -> Result<ConicProgram> {
    if spec.family == Family::Socp {
        return Err(SolverError::InvalidOptions(
            "gen_lp called with the socp family".into(),
        ));
    }
    generate(spec).map(|(p, _)| p)
}

pub fn gen_socp(spec: &GenSpec) -> Result<ConicProgram> {
    if spec.family != Family::Socp {
        return Err(SolverError::InvalidOptions(format!(
            "gen_socp called with the {} family",
            spec.family
        )));
    }
    generate(spec).map(|(p, _)| p)
}

/// A badly scaled 3×5 LP with reference equilibration and adaptive scalings.
#[derive(Debug, Clone)]
pub struct SmallExample {
    pub program: ConicProgram,
    pub d_sk: DVector<f64>,
    pub e_sk: DVector<f64>,
    pub d_ac: DVector<f64>,
    pub e_ac: DVector<f64>,
    /// Reference condition numbers of `A`, `D_SK·A·E_SK` and `D_AC·A·E_AC`.
    pub expected_conds: [f64; 3],
}

pub fn small_example() -> SmallExample {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(3, 5, &[
        3.57, 3.45, 3.33, 64.24, -72.76,
        3.45, 3.33, 3.23, 95.14, -23.34,
        3.33, 3.23, 3.13, 93.53, -17.43,
    ]);
    let b = DVector::from_vec(vec![-10.44, 20.65, 22.94]);
    let c = DVector::from_vec(vec![0.37, 1.93, -0.12, -0.38, 1.01]);
    let program = ConicProgram::new(a, b, c, ConeSpec::nonneg(5).expect("nonempty"))
        .expect("consistent data");
    SmallExample {
        program,
        d_sk: DVector::from_vec(vec![0.0217, 0.0215, 0.0222]),
        e_sk: DVector::from_element(5, 0.4722),
        d_ac: DVector::from_element(3, 1.0),
        e_ac: DVector::from_vec(vec![0.0792, 0.0884, 14.5484, 292.9524, 316.2179]),
        expected_conds: [2046.4, 2044.38, 72079.13],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::condition_number;

    #[test]
    fn lp_normal_shape_and_feasibility() {
        let (p, x0) = generate(&GenSpec::new(Family::LpNormal, 100, 3)).unwrap();
        assert_eq!((p.m(), p.n()), (80, 100));
        assert!(x0.iter().all(|&v| v >= 0.0));
        assert!((p.a.mul_vec(&x0) - &p.b).norm() <= 1e-12 * p.b.norm());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        for family in [Family::LpNormal, Family::LpUniform, Family::Socp] {
            let spec = GenSpec::new(family, 40, 11);
            assert_eq!(generate(&spec).unwrap().0, generate(&spec).unwrap().0);
            let other = GenSpec { seed: 12, ..spec };
            assert_ne!(
                generate(&other).unwrap().0.b,
                generate(&GenSpec::new(family, 40, 11)).unwrap().0.b
            );
        }
    }

    #[test]
    fn lp_uniform_entries_bounded() {
        let p = gen_lp(&GenSpec::new(Family::LpUniform, 1000, 7)).unwrap();
        assert!(p.a.values().iter().all(|v| v.abs() <= 1.0));
        assert_eq!(p.m(), 800);
    }

    #[test]
    fn socp_blocks_and_feasible_point() {
        let (p, x0) = generate(&GenSpec::new(Family::Socp, 100, 1)).unwrap();
        assert_eq!(p.cones.blocks().len(), 25);
        assert!(p.cones.blocks().iter().all(|b| b.dim == 4));
        let ops = ConeOps::new(p.cones.clone());
        assert_eq!(ops.distance(&x0), 0.0);
        assert!(p.c.iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn socp_rejects_indivisible() {
        let spec = GenSpec {
            cone_size: 7,
            ..GenSpec::new(Family::Socp, 100, 1)
        };
        assert_eq!(
            gen_socp(&spec),
            Err(SolverError::IndivisibleConeSize { n: 100, h: 7 })
        );
    }

    #[test]
    fn spec_validation() {
        assert!(GenSpec::new(Family::LpNormal, 1, 0).validate().is_err());
        assert!(GenSpec {
            m: Some(0),
            ..GenSpec::new(Family::LpNormal, 10, 0)
        }
        .validate()
        .is_err());
        assert!(GenSpec {
            m: Some(11),
            ..GenSpec::new(Family::LpNormal, 10, 0)
        }
        .validate()
        .is_err());
        assert!(gen_lp(&GenSpec::new(Family::Socp, 8, 0)).is_err());
        assert_eq!("lp-uniform".parse::<Family>().unwrap(), Family::LpUniform);
        assert!("mps".parse::<Family>().is_err());
    }

    #[test]
    fn uniform_samples_stay_inside_unit_interval() {
        let mut s = Stream::new(0, 0);
        for _ in 0..10_000 {
            let u = s.unit();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn example_data() {
        let ex = small_example();
        assert_eq!(ex.program.b.as_slice(), &[-10.44, 20.65, 22.94]);
        assert_eq!(
            ex.e_ac.as_slice(),
            &[0.0792, 0.0884, 14.5484, 292.9524, 316.2179]
        );
        let cond = condition_number(&ex.program.dense_a());
        assert!((cond / 2046.4 - 1.0).abs() < 0.005);
    }
}
