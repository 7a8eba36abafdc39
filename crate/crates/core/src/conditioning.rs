//! Adaptive conditioning of the splitting iteration, and regularized
//! Sinkhorn-Knopp equilibration for comparison.
//!
//! At each scheduled iteration a per-cone coefficient
//! `o_i = |x₁ − ‖x₂..‖| / |z₁|` is computed from the current iterate pair,
//! compressed so that `ln max(o) − ln min(o) ≤ t`, and installed as a column
//! scaling `O` of `A`. The iterate is recast into the new space so progress
//! carries over.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::cones::ConeOps;
use crate::error::{Result, SolverError};
use crate::problem::{ConeKind, ConeSpec, ConicProgram};
use crate::splitting::{compute_d, SplittingState};
use crate::subspace::SubspaceProjector;

pub const DEFAULT_CLAMP_LO: f64 = 1e-8;
pub const DEFAULT_CLAMP_HI: f64 = 1e8;

/// Preset `t` for linear programs.
pub const LP_T: f64 = 9.2;
/// Preset `t` for second-order cone programs.
pub const SOCP_T: f64 = 1.7;

/// Iterations at which conditioning fires.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    Never,
    /// `{start, start+stride, …}`, optionally capped at `end` (inclusive).
    Periodic {
        start: usize,
        stride: usize,
        end: Option<usize>,
    },
    Once(usize),
    Explicit(BTreeSet<usize>),
}

impl Schedule {
    pub fn contains(&self, iter: usize) -> bool {
        match self {
            Schedule::Never => false,
            Schedule::Periodic { start, stride, end } => {
                iter >= *start
                    && (iter - start).is_multiple_of(*stride)
                    && end.is_none_or(|e| iter <= e)
            }
            Schedule::Once(k) => iter == *k,
            Schedule::Explicit(set) => set.contains(&iter),
        }
    }

    /// `{1, 2, …, last}`
    pub fn first(last: usize) -> Self {
        Schedule::Periodic {
            start: 1,
            stride: 1,
            end: Some(last),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = match self {
            Schedule::Never => false,
            Schedule::Periodic { start, stride, end } => {
                *start == 0 || *stride == 0 || end.is_some_and(|e| e < *start)
            }
            Schedule::Once(k) => *k == 0,
            Schedule::Explicit(set) => set.contains(&0),
        };
        if bad {
            return Err(SolverError::InvalidOptions(format!(
                "invalid conditioning schedule {self}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Never => write!(f, "none"),
            Schedule::Periodic {
                start,
                stride,
                end: None,
            } => write!(f, "{start}:{stride}"),
            Schedule::Periodic {
                start,
                stride,
                end: Some(e),
            } => write!(f, "{start}:{stride}:{e}"),
            Schedule::Once(k) => write!(f, "once:{k}"),
            Schedule::Explicit(set) => {
                let items: Vec<String> = set.iter().map(|k| k.to_string()).collect();
                write!(f, "{}", items.join(","))
            }
        }
    }
}

impl FromStr for Schedule {
    type Err = SolverError;

    /// Accepts `none`, `once:K`, `start:stride`, `start:stride:end`, or a
    /// comma-separated list of iterations.
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad =
            || SolverError::InvalidOptions(format!("cannot parse conditioning schedule '{text}'"));
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        let schedule = if text.eq_ignore_ascii_case("none") {
            Schedule::Never
        } else if let Some(k) = text.strip_prefix("once:") {
            Schedule::Once(num(k)?)
        } else if text.contains(':') {
            let parts: Vec<&str> = text.split(':').collect();
            match parts.as_slice() {
                [start, stride] => Schedule::Periodic {
                    start: num(start)?,
                    stride: num(stride)?,
                    end: None,
                },
                [start, stride, end] => Schedule::Periodic {
                    start: num(start)?,
                    stride: num(stride)?,
                    end: Some(num(end)?),
                },
                _ => return Err(bad()),
            }
        } else {
            Schedule::Explicit(text.split(',').map(num).collect::<Result<_>>()?)
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningPolicy {
    pub schedule: Schedule,
    /// Upper bound on `ln max(O) − ln min(O)` after normalization.
    pub t: f64,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
}

impl ConditioningPolicy {
    pub fn new(schedule: Schedule, t: f64) -> Result<Self> {
        let policy = Self {
            schedule,
            t,
            clamp_lo: DEFAULT_CLAMP_LO,
            clamp_hi: DEFAULT_CLAMP_HI,
        };
        policy.validate()?;
        Ok(policy)
    }

    /// `t = 9.2`, conditioning at 300, 400, ….
    pub fn lp_default() -> Self {
        Self::new(
            Schedule::Periodic {
                start: 300,
                stride: 100,
                end: None,
            },
            LP_T,
        )
        .expect("valid preset")
    }

    /// `t = 1.7`, conditioning at 200, 300, ….
    pub fn socp_default() -> Self {
        Self::new(
            Schedule::Periodic {
                start: 200,
                stride: 100,
                end: None,
            },
            SOCP_T,
        )
        .expect("valid preset")
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(SolverError::InvalidOptions(format!(
                "t must be positive, got {}",
                self.t
            )));
        }
        if !(self.clamp_lo > 0.0 && self.clamp_lo < self.clamp_hi && self.clamp_hi.is_finite()) {
            return Err(SolverError::InvalidOptions(format!(
                "clamp bounds must satisfy 0 < lo < hi, got [{}, {}]",
                self.clamp_lo, self.clamp_hi
            )));
        }
        Ok(())
    }

    /// Conditioning fires on the first iteration and on every scheduled one.
    pub fn fires_at(&self, iter: usize) -> bool {
        iter == 1 || self.schedule.contains(iter)
    }
}

/// Per-cone coefficients `o`, constant within each block and clamped to
/// `[clamp_lo, clamp_hi]`.
///
/// A zero (or non-finite) leading dual entry yields `clamp_hi`.
pub fn compute_o(
    cones: &ConeSpec,
    x: &DVector<f64>,
    z: &DVector<f64>,
    clamp_lo: f64,
    clamp_hi: f64,
) -> DVector<f64> {
    let mut o = DVector::zeros(cones.total_dim());
    let coefficient = |head_x: f64, tail_norm: f64, head_z: f64| {
        let denom = head_z.abs();
        if denom == 0.0 || !denom.is_finite() {
            return clamp_hi;
        }
        let ratio = (head_x - tail_norm).abs() / denom;
        if ratio.is_nan() {
            clamp_hi
        } else {
            ratio.clamp(clamp_lo, clamp_hi)
        }
    };
    for (kind, range) in cones.block_ranges() {
        match kind {
            ConeKind::NonNeg => {
                for j in range {
                    o[j] = coefficient(x[j], 0.0, z[j]);
                }
            }
            ConeKind::Lorentz => {
                let h = range.start;
                let tail = x.rows(h + 1, range.len() - 1).norm();
                let value = coefficient(x[h], tail, z[h]);
                for j in range {
                    o[j] = value;
                }
            }
        }
    }
    o
}

/// The exponent `min{1, t / (ln max(o) − ln min(o))}`, `1` when all entries agree.
pub fn normalization_exponent(o: &DVector<f64>, t: f64) -> f64 {
    let spread = o.max().ln() - o.min().ln();
    if spread <= 0.0 {
        1.0
    } else {
        (t / spread).min(1.0)
    }
}

/// `O = diag(|o|)^e` with `e` from [`normalization_exponent`].
pub fn normalize_o(o: &DVector<f64>, t: f64) -> DVector<f64> {
    let e = normalization_exponent(o, t);
    o.map(|v| v.abs().powf(e))
}

/// The diagonal currently installed in a splitting state, with the matching
/// projector for `A·O`.
#[derive(Debug, Clone)]
pub struct ScalingState {
    pub o: DVector<f64>,
    pub projector: Arc<SubspaceProjector>,
    pub d: DVector<f64>,
}

/// Installs diagonal scaling `o` into `state` and recasts the iterate from
/// the original-space pair `(x, z)` as `s = O⁻¹x − μOz`.
///
/// `original` must be the projector of `program`'s unscaled matrix.
pub fn recondition(
    state: &mut SplittingState,
    program: &ConicProgram,
    original: &SubspaceProjector,
    o: DVector<f64>,
    x: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<ScalingState> {
    let mu = state.mu();
    let scaling = prepare_scaling(program, original, o, mu)?;
    let s = DVector::from_fn(x.len(), |j, _| {
        x[j] / scaling.o[j] - mu * scaling.o[j] * z[j]
    });
    apply_scaling(state, program, &scaling, s)?;
    Ok(scaling)
}

/// Builds the projector of `A·O` and the matching `d`.
pub fn prepare_scaling(
    program: &ConicProgram,
    original: &SubspaceProjector,
    o: DVector<f64>,
    mu: f64,
) -> Result<ScalingState> {
    crate::cones::check_block_constant(&program.cones, &o)?;
    let projector = Arc::new(original.refresh(&o)?);
    let d = compute_d(&projector, &program.b, &program.c.component_mul(&o), mu);
    Ok(ScalingState { o, projector, d })
}

pub(crate) fn apply_scaling(
    state: &mut SplittingState,
    program: &ConicProgram,
    scaling: &ScalingState,
    s: DVector<f64>,
) -> Result<()> {
    let cones = ConeOps::with_scales(program.cones.clone(), &scaling.o)?;
    state.install(
        scaling.projector.clone(),
        cones,
        scaling.o.clone(),
        scaling.d.clone(),
        s,
    );
    Ok(())
}

/// Adaptive conditioning event: compute and normalize `o` from the current
/// iterate pair, then recondition.
pub fn adaptive_event(
    state: &mut SplittingState,
    program: &ConicProgram,
    original: &SubspaceProjector,
    policy: &ConditioningPolicy,
    x: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<ScalingState> {
    let o = compute_o(&program.cones, x, z, policy.clamp_lo, policy.clamp_hi);
    let scale = normalize_o(&o, policy.t);
    recondition(state, program, original, scale, x, z)
}

/// Row and column scalings `(D, E)` from regularized Sinkhorn-Knopp on ℓ₂ norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibration {
    pub row: DVector<f64>,
    pub col: DVector<f64>,
    pub sweeps: usize,
}

impl Equilibration {
    pub fn apply(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
            self.row[i] * a[(i, j)] * self.col[j]
        })
    }
}

/// Default damping exponent per sweep.
pub const SINKHORN_DAMPING: f64 = 0.9;
pub const SINKHORN_MAX_SWEEPS: usize = 100;

/// Alternating row and column ℓ₂ equilibration of `a`.
///
/// Each sweep multiplies every row scale by `(g / ‖row‖)^damping`, where `g`
/// is the geometric mean of the current row norms, then does the same for
/// columns. `damping = 1` is the classic update; smaller values regularize it.
/// Iteration stops early once all row norms and all column norms agree to
/// within a relative `1e-12`.
pub fn sinkhorn_knopp(a: &DMatrix<f64>, max_sweeps: usize, damping: f64) -> Result<Equilibration> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(SolverError::InvalidOptions(format!(
            "damping must lie in (0, 1], got {damping}"
        )));
    }
    let (m, n) = a.shape();
    let sq = a.map(|v| v * v);
    if let Some(i) = (0..m).find(|&i| sq.row(i).sum() == 0.0) {
        return Err(SolverError::ZeroRowOrColumn {
            kind: "row",
            index: i,
        });
    }
    if let Some(j) = (0..n).find(|&j| sq.column(j).sum() == 0.0) {
        return Err(SolverError::ZeroRowOrColumn {
            kind: "column",
            index: j,
        });
    }
    let mut row = DVector::from_element(m, 1.0);
    let mut col = DVector::from_element(n, 1.0);
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        let row_norms = DVector::from_fn(m, |i, _| {
            (0..n)
                .map(|j| sq[(i, j)] * col[j] * col[j])
                .sum::<f64>()
                .sqrt()
                * row[i]
        });
        let col_norms = DVector::from_fn(n, |j, _| {
            (0..m)
                .map(|i| sq[(i, j)] * row[i] * row[i])
                .sum::<f64>()
                .sqrt()
                * col[j]
        });
        if spread(&row_norms) <= 1.0 + 1e-12 && spread(&col_norms) <= 1.0 + 1e-12 {
            break;
        }
        let g = geometric_mean(&row_norms);
        for i in 0..m {
            row[i] *= (g / row_norms[i]).powf(damping);
        }
        let col_norms = DVector::from_fn(n, |j, _| {
            (0..m)
                .map(|i| sq[(i, j)] * row[i] * row[i])
                .sum::<f64>()
                .sqrt()
                * col[j]
        });
        let g = geometric_mean(&col_norms);
        for j in 0..n {
            col[j] *= (g / col_norms[j]).powf(damping);
        }
        sweeps += 1;
    }
    Ok(Equilibration { row, col, sweeps })
}

/// Replaces each Lorentz block of `col` by its geometric mean so that the
/// scaled cone stays `K`.
pub fn block_constant(cones: &ConeSpec, col: &DVector<f64>) -> DVector<f64> {
    let mut out = col.clone();
    for (kind, range) in cones.block_ranges() {
        if kind == ConeKind::Lorentz {
            let mean = (range.clone().map(|j| col[j].ln()).sum::<f64>() / range.len() as f64).exp();
            for j in range {
                out[j] = mean;
            }
        }
    }
    out
}

/// `max / min` of a positive vector.
pub fn spread(v: &DVector<f64>) -> f64 {
    v.max() / v.min()
}

fn geometric_mean(v: &DVector<f64>) -> f64 {
    (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp()
}

/// Row and column ℓ₂ norms of `a`.
pub fn row_col_norms(a: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
    let rows = DVector::from_fn(a.nrows(), |i, _| a.row(i).norm());
    let cols = DVector::from_fn(a.ncols(), |j, _| a.column(j).norm());
    (rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ConeBlock;
    use crate::splitting::SolveOptions;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn schedule_parsing() {
        assert_eq!("none".parse::<Schedule>().unwrap(), Schedule::Never);
        assert_eq!("once:300".parse::<Schedule>().unwrap(), Schedule::Once(300));
        let periodic: Schedule = "300:100".parse().unwrap();
        assert!(
            periodic.contains(300)
                && periodic.contains(500)
                && !periodic.contains(350)
                && !periodic.contains(200)
        );
        let first: Schedule = "1:1:50".parse().unwrap();
        assert_eq!(first, Schedule::first(50));
        assert!(first.contains(1) && first.contains(50) && !first.contains(51));
        let list: Schedule = "3,7".parse().unwrap();
        assert!(list.contains(7) && !list.contains(5));
        assert!("0:10".parse::<Schedule>().is_err());
        assert!("10:0".parse::<Schedule>().is_err());
        assert!("abc".parse::<Schedule>().is_err());
        assert_eq!(periodic.to_string(), "300:100");
    }

    #[test]
    fn policy_validation() {
        assert!(ConditioningPolicy::new(Schedule::Never, 0.0).is_err());
        let mut p = ConditioningPolicy::lp_default();
        p.clamp_lo = 2.0;
        p.clamp_hi = 1.0;
        assert!(p.validate().is_err());
        assert!(ConditioningPolicy::lp_default().fires_at(1));
        assert!(ConditioningPolicy::socp_default().fires_at(200));
        // t above one is accepted
        assert!(ConditioningPolicy::new(Schedule::Never, 9.2).is_ok());
    }

    #[test]
    fn compute_o_lp_blocks() {
        let spec = ConeSpec::nonneg(2).unwrap();
        let o = compute_o(
            &spec,
            &v(&[0.5, 2.0]),
            &v(&[1.0, 0.25]),
            DEFAULT_CLAMP_LO,
            DEFAULT_CLAMP_HI,
        );
        assert_relative_eq!(o, v(&[0.5, 8.0]), epsilon = 1e-15);
    }

    #[test]
    fn compute_o_boundary_and_zero_dual() {
        let spec = ConeSpec::new(vec![ConeBlock::lorentz(3), ConeBlock::nonneg(1)]).unwrap();
        let o = compute_o(
            &spec,
            &v(&[5.0, 3.0, 4.0, 1.0]),
            &v(&[2.0, 0.0, 0.0, 0.0]),
            DEFAULT_CLAMP_LO,
            DEFAULT_CLAMP_HI,
        );
        assert_eq!(
            o,
            v(&[
                DEFAULT_CLAMP_LO,
                DEFAULT_CLAMP_LO,
                DEFAULT_CLAMP_LO,
                DEFAULT_CLAMP_HI
            ])
        );
    }

    #[test]
    fn normalize_examples() {
        let o = v(&[0.5, 8.0]);
        assert_eq!(normalize_o(&o, 9.2), o);
        // e = 1/ln 16, O = (0.5^e, 8^e) = (e^{-1/4}, e^{3/4})
        let e = normalization_exponent(&o, 1.0);
        assert_relative_eq!(e, 0.360_673_760_222_241, epsilon = 1e-12);
        let scaled = normalize_o(&o, 1.0);
        assert_relative_eq!(scaled[0], (-0.25f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(scaled[1], 0.75f64.exp(), epsilon = 1e-12);
        assert_relative_eq!(scaled[0], 0.7788, epsilon = 1e-4);
        assert_relative_eq!(scaled[1], 2.1170, epsilon = 1e-4);
        assert_eq!(normalize_o(&v(&[3.0, 3.0]), 0.1), v(&[3.0, 3.0]));
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

    #[test]
    fn identity_recondition_leaves_state() {
        let p = tiny_lp();
        let original = p.projector().unwrap();
        let mut st =
            SplittingState::init(&p, Arc::new(original.clone()), &SolveOptions::default()).unwrap();
        for _ in 0..3 {
            st.step().unwrap();
        }
        let before = st.s().clone();
        let (x, z) = st.extract_pair();
        recondition(
            &mut st,
            &p,
            &original,
            DVector::from_element(2, 1.0),
            &x,
            &z,
        )
        .unwrap();
        assert!((st.s() - before).norm() < 1e-15);
    }

    #[test]
    fn recast_optimum_is_scaled_fixed_point() {
        let p = tiny_lp();
        let original = p.projector().unwrap();
        let mut st =
            SplittingState::init(&p, Arc::new(original.clone()), &SolveOptions::default()).unwrap();
        let (x_opt, z_opt) = (v(&[0.0, 1.0]), v(&[1.0, 0.0]));
        for o in [v(&[2.0, 0.5]), v(&[1e-3, 40.0]), v(&[7.0, 7.0])] {
            recondition(&mut st, &p, &original, o.clone(), &x_opt, &z_opt).unwrap();
            assert!(st.fixed_point_residual(st.s()) <= 1e-10, "o = {o:?}");
            // the scaled optimum (O⁻¹x, Oz) maps back to (x, z)
            let (x, z) = st.extract_pair();
            assert!((x - &x_opt).norm() < 1e-12 && (z - &z_opt).norm() < 1e-12);
            st.step().unwrap();
            assert!(st.fixed_point_residual(st.s()) <= 1e-10);
        }
    }

    #[test]
    fn sinkhorn_diag() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 100.0]);
        let eq = sinkhorn_knopp(&a, 100, SINKHORN_DAMPING).unwrap();
        let (rows, cols) = row_col_norms(&eq.apply(&a));
        assert!((rows[0] - rows[1]).abs() <= 1e-6 * rows.max());
        assert!((cols[0] - cols[1]).abs() <= 1e-6 * cols.max());
    }

    #[test]
    fn sinkhorn_orthogonal_is_scalar() {
        let t = 0.3f64;
        let a = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let eq = sinkhorn_knopp(&a, 100, SINKHORN_DAMPING).unwrap();
        assert!(spread(&eq.row) < 1.0 + 1e-12 && spread(&eq.col) < 1.0 + 1e-12);
    }

    #[test]
    fn sinkhorn_rejects_zero_lines() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            sinkhorn_knopp(&a, 10, 0.9),
            Err(SolverError::ZeroRowOrColumn {
                kind: "row",
                index: 1
            })
        ));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            sinkhorn_knopp(&b, 10, 0.9),
            Err(SolverError::ZeroRowOrColumn {
                kind: "column",
                index: 1
            })
        ));
    }

    #[test]
    fn block_constant_averages_lorentz_blocks() {
        let spec = ConeSpec::new(vec![ConeBlock::nonneg(1), ConeBlock::lorentz(2)]).unwrap();
        let out = block_constant(&spec, &v(&[3.0, 1.0, 4.0]));
        assert_relative_eq!(out, v(&[3.0, 2.0, 2.0]), epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn o_is_block_constant(
            xs in proptest::collection::vec(-3.0f64..3.0, 9),
            zs in proptest::collection::vec(-3.0f64..3.0, 9),
        ) {
            let spec = ConeSpec::new(vec![ConeBlock::nonneg(2), ConeBlock::lorentz(4), ConeBlock::lorentz(3)]).unwrap();
            let o = compute_o(&spec, &v(&xs), &v(&zs), DEFAULT_CLAMP_LO, DEFAULT_CLAMP_HI);
            prop_assert!(crate::cones::check_block_constant(&spec, &o).is_ok());
            prop_assert!(o.iter().all(|&x| (DEFAULT_CLAMP_LO..=DEFAULT_CLAMP_HI).contains(&x)));
            let scaled = normalize_o(&o, 1.7);
            prop_assert!(crate::cones::check_block_constant(&spec, &scaled).is_ok());
        }

        #[test]
        fn normalize_preserves_order(
            os in proptest::collection::vec(1e-6f64..1e6, 2..12),
            t in 0.1f64..20.0,
        ) {
            let o = v(&os);
            let scaled = normalize_o(&o, t);
            let e = normalization_exponent(&o, t);
            prop_assert!(e <= 1.0);
            if (o.max() / o.min()).ln() <= t {
                prop_assert_eq!(e, 1.0);
            }
            prop_assert!((scaled.max() / scaled.min()).ln() <= t + 1e-9);
            for i in 0..o.len() {
                for j in 0..o.len() {
                    if o[i] <= o[j] {
                        prop_assert!(scaled[i] <= scaled[j]);
                    }
                }
            }
        }
    }
}
