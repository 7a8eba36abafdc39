//! Solve loop shared by the splitting method and the baselines:
//! preconditioning, adaptive conditioning events, stopping rules and traces.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;

use crate::baselines::{Admm, DouglasRachford};
use crate::conditioning::{
    apply_scaling, block_constant, compute_o, normalize_o, prepare_scaling, sinkhorn_knopp,
    ConditioningPolicy, SINKHORN_DAMPING, SINKHORN_MAX_SWEEPS,
};
use crate::cones::ConeOps;
use crate::error::{Result, SolverError};
use crate::problem::{residuals, ConicProgram, ResidualReport, Solution};
use crate::splitting::{InitialPoint, SolveOptions, SplittingState};
use crate::subspace::SubspaceProjector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Split,
    DouglasRachford,
    Admm,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Split => "split",
            Algorithm::DouglasRachford => "dr",
            Algorithm::Admm => "admm",
        })
    }
}

impl FromStr for Algorithm {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split" => Ok(Algorithm::Split),
            "dr" => Ok(Algorithm::DouglasRachford),
            "admm" => Ok(Algorithm::Admm),
            _ => Err(SolverError::InvalidOptions(format!(
                "unknown algorithm '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Preconditioner {
    None,
    /// Regularized Sinkhorn-Knopp `(D, E)` applied before the solve.
    Sinkhorn {
        sweeps: usize,
        damping: f64,
    },
    /// Caller-supplied `(D, E)`.
    Fixed {
        row: DVector<f64>,
        col: DVector<f64>,
    },
    /// Scheduled adaptive conditioning; only valid with [`Algorithm::Split`].
    Adaptive(ConditioningPolicy),
}

impl Preconditioner {
    pub fn sinkhorn() -> Self {
        Preconditioner::Sinkhorn {
            sweeps: SINKHORN_MAX_SWEEPS,
            damping: SINKHORN_DAMPING,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preconditioner::None => "none",
            Preconditioner::Sinkhorn { .. } => "sinkhorn",
            Preconditioner::Fixed { .. } => "fixed",
            Preconditioner::Adaptive(_) => "adaptive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Absolute tolerances from [`SolveOptions::tol`]. Cone distances count
    /// toward the primal and dual tolerances.
    Internal,
    /// Stop once `‖Ax − b‖ < primal` and `|(A†b)ᵀ(c − z) − cᵀx| < gap`,
    /// both strict.
    Reference { primal: f64, gap: f64 },
}

impl StopRule {
    /// Builds the reference rule from a competing solution `(x_cs, y_cs)`.
    pub fn from_reference(
        program: &ConicProgram,
        x_cs: &DVector<f64>,
        y_cs: &DVector<f64>,
    ) -> Result<Self> {
        if x_cs.len() != program.n() || y_cs.len() != program.m() {
            return Err(SolverError::DimensionMismatch(
                "reference solution does not match program".into(),
            ));
        }
        let primal = (program.a.mul_vec(x_cs) - &program.b).norm();
        let gap = (program.b.dot(y_cs) - program.c.dot(x_cs)).abs();
        Ok(StopRule::Reference { primal, gap })
    }

    pub fn satisfied(&self, report: &ResidualReport, options: &SolveOptions) -> bool {
        match *self {
            StopRule::Internal => {
                let tol = options.tol;
                report.primal_res.max(report.cone_dist_x) <= tol.primal
                    && report.dual_res.max(report.cone_dist_z) <= tol.dual
                    && report.gap <= tol.gap
            }
            StopRule::Reference { primal, gap } => report.primal_res < primal && report.gap < gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub algorithm: Algorithm,
    pub preconditioner: Preconditioner,
    pub options: SolveOptions,
    pub stop: StopRule,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Split,
            preconditioner: Preconditioner::None,
            options: SolveOptions::default(),
            stop: StopRule::Internal,
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        self.options.validate()?;
        match &self.preconditioner {
            Preconditioner::Adaptive(policy) => {
                policy.validate()?;
                if self.algorithm != Algorithm::Split {
                    return Err(SolverError::InvalidOptions(format!(
                        "adaptive conditioning requires the split algorithm, not {}",
                        self.algorithm
                    )));
                }
            }
            Preconditioner::Sinkhorn { sweeps, damping }
                if *sweeps == 0 || !(*damping > 0.0 && *damping <= 1.0) =>
            {
                return Err(SolverError::InvalidOptions(
                    "invalid Sinkhorn parameters".into(),
                ));
            }
            _ => {}
        }
        if self.algorithm != Algorithm::Split && self.options.initial != InitialPoint::Zero {
            return Err(SolverError::InvalidOptions(
                "warm starts are only supported by the split algorithm".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
    TimeLimit,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::TimeLimit => "time_limit",
        })
    }
}

/// One row of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub gap: f64,
    pub wall_ms: f64,
    pub conditioning_event: bool,
}

impl TraceRecord {
    pub fn combined(&self) -> f64 {
        self.primal_res.max(self.dual_res).max(self.gap)
    }
}

/// What an observer sees after every iteration.
pub struct IterationView<'a> {
    pub record: &'a TraceRecord,
    pub report: &'a ResidualReport,
    /// Reported pair in the original space.
    pub x: &'a DVector<f64>,
    pub z: &'a DVector<f64>,
    /// Present for the split algorithm.
    pub split_state: Option<&'a SplittingState>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Solution,
    pub status: Status,
    pub iterations: usize,
    pub residuals: ResidualReport,
    pub trace: Vec<TraceRecord>,
    pub conditioning_events: Vec<usize>,
    /// Column scaling in effect at the end (`E` or the last `O`).
    pub final_scaling: DVector<f64>,
    pub wall_ms: f64,
}

enum Engine {
    Split(SplittingState),
    Dr(DouglasRachford),
    Admm(Admm),
}

impl Engine {
    fn step(&mut self) -> Result<()> {
        match self {
            Engine::Split(s) => s.step(),
            Engine::Dr(s) => s.step(),
            Engine::Admm(s) => s.step(),
        }
    }

    fn pair(&self) -> (DVector<f64>, DVector<f64>) {
        match self {
            Engine::Split(s) => s.extract_pair(),
            Engine::Dr(s) => s.pair(),
            Engine::Admm(s) => s.pair(),
        }
    }
}

/// Solves `program`, building its projector.
pub fn solve(program: &ConicProgram, settings: &RunSettings) -> Result<SolveReport> {
    let projector = Arc::new(program.projector()?);
    solve_observed(program, projector, settings, |_| {})
}

/// Solves with a prebuilt projector of `program`'s matrix, calling `observer`
/// after every iteration.
pub fn solve_observed(
    program: &ConicProgram,
    projector: Arc<SubspaceProjector>,
    settings: &RunSettings,
    mut observer: impl FnMut(&IterationView<'_>),
) -> Result<SolveReport> {
    settings.validate()?;
    program.validate()?;
    let options = &settings.options;
    let start = Instant::now();

    // Static scaling (x = E x̂, z = E⁻¹ ẑ) and the program the engine runs on.
    let (row, col) = match &settings.preconditioner {
        Preconditioner::Sinkhorn { sweeps, damping } => {
            let eq = sinkhorn_knopp(&program.dense_a(), *sweeps, *damping)?;
            (Some(eq.row), Some(block_constant(&program.cones, &eq.col)))
        }
        Preconditioner::Fixed { row, col } => {
            if row.len() != program.m() {
                return Err(SolverError::DimensionMismatch(
                    "row scaling length differs from m".into(),
                ));
            }
            crate::cones::check_block_constant(&program.cones, col)?;
            if row.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
                return Err(SolverError::InvalidOptions(
                    "row scaling must be positive".into(),
                ));
            }
            (Some(row.clone()), Some(col.clone()))
        }
        _ => (None, None),
    };
    let scaled_program;
    let (inner, inner_projector) = match (&row, &col) {
        (Some(r), Some(c)) => {
            scaled_program = program.scaled(r, c);
            let p = Arc::new(scaled_program.projector()?);
            (&scaled_program, p)
        }
        _ => (program, projector.clone()),
    };

    let mut engine = match settings.algorithm {
        Algorithm::Split => Engine::Split(SplittingState::init(inner, inner_projector, options)?),
        Algorithm::DouglasRachford => {
            Engine::Dr(DouglasRachford::new(inner, inner_projector, options.mu)?)
        }
        Algorithm::Admm => Engine::Admm(Admm::new(inner, inner_projector, options.mu)?),
    };
    let policy = match &settings.preconditioner {
        Preconditioner::Adaptive(p) => Some(p),
        _ => None,
    };

    let map_back = |(x, z): (DVector<f64>, DVector<f64>)| match &col {
        Some(e) => (x.component_mul(e), z.component_div(e)),
        None => (x, z),
    };

    let mut trace = Vec::new();
    let mut events = Vec::new();
    let mut status = Status::MaxIters;
    let mut last: Option<(DVector<f64>, DVector<f64>, ResidualReport)> = None;
    let mut iterations = 0;

    for iter in 1..=options.max_iters {
        let mut event = false;
        if let (Some(policy), Engine::Split(state)) = (policy, &mut engine) {
            if policy.fires_at(iter) {
                adaptive_step(state, program, &projector, policy, options, iter)?;
                events.push(iter);
                event = true;
            }
        }
        engine.step()?;
        iterations = iter;

        let (x, z) = map_back(engine.pair());
        let report = residuals(program, &projector, &x, &z);
        if !report.is_finite() {
            return Err(SolverError::NonFinite { iter });
        }
        let record = TraceRecord {
            iter,
            primal_res: report.primal_res,
            dual_res: report.dual_res,
            gap: report.gap,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            conditioning_event: event,
        };
        let done = settings.stop.satisfied(&report, options);
        let out_of_time = options
            .max_seconds
            .is_some_and(|limit| start.elapsed().as_secs_f64() >= limit);
        if iter % options.trace_stride == 0
            || event
            || done
            || out_of_time
            || iter == options.max_iters
        {
            trace.push(record);
        }
        observer(&IterationView {
            record: &record,
            report: &report,
            x: &x,
            z: &z,
            split_state: match &engine {
                Engine::Split(s) => Some(s),
                _ => None,
            },
        });
        last = Some((x, z, report));
        if done {
            status = Status::Converged;
            break;
        }
        if out_of_time {
            status = Status::TimeLimit;
            break;
        }
    }

    let (x, z, report) = last.expect("max_iters ≥ 1 guarantees one iteration");
    let final_scaling = match (&engine, &col) {
        (Engine::Split(s), None) => s.scale().clone(),
        (_, Some(e)) => e.clone(),
        (_, None) => DVector::from_element(program.n(), 1.0),
    };
    Ok(SolveReport {
        solution: Solution::from_pair(program, &projector, x, z),
        status,
        iterations,
        residuals: report,
        trace,
        conditioning_events: events,
        final_scaling,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// One adaptive conditioning event before iteration `iter`.
///
/// On the first iteration the pair comes from the initial point: a warm
/// start `(x, z)` if given, otherwise the cone identity `(e, e)` with `s`
/// kept at zero.
fn adaptive_step(
    state: &mut SplittingState,
    program: &ConicProgram,
    original: &SubspaceProjector,
    policy: &ConditioningPolicy,
    options: &SolveOptions,
    iter: usize,
) -> Result<()> {
    let (x, z, keep_zero) = if iter == 1 {
        match &options.initial {
            InitialPoint::Zero => {
                let e = ConeOps::new(program.cones.clone()).identity_element();
                (e.clone(), e, true)
            }
            InitialPoint::WarmStart { x, z } => (x.clone(), z.clone(), false),
        }
    } else {
        let (x, z) = state.iterate_pair();
        (x, z, false)
    };
    let o = normalize_o(
        &compute_o(&program.cones, &x, &z, policy.clamp_lo, policy.clamp_hi),
        policy.t,
    );
    let mu = state.mu();
    let scaling = prepare_scaling(program, original, o, mu)?;
    let s = if keep_zero {
        DVector::zeros(program.n())
    } else {
        DVector::from_fn(program.n(), |j, _| {
            x[j] / scaling.o[j] - mu * scaling.o[j] * z[j]
        })
    };
    apply_scaling(state, program, &scaling, s)
}
