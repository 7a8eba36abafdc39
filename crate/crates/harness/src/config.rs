//! Solver configuration shared by `solve` and `bench`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use conic_split::io::read_solution;
use conic_split::{
    Algorithm, ConditioningPolicy, ConeKind, ConicProgram, Preconditioner, RunSettings, Schedule,
    SolveOptions, StopRule, Tolerances,
};
use nalgebra::DVector;
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub name: Option<String>,
    pub algorithm: String,
    /// `none`, `sinkhorn`, `adaptive` or `fixed`.
    pub precondition: String,
    pub mu: f64,
    /// Normalization parameter; defaults to 9.2 for LPs and 1.7 otherwise.
    pub t: Option<f64>,
    /// Conditioning schedule; defaults to `300:100` for LPs and `200:100` otherwise.
    pub condition: Option<String>,
    pub tol: f64,
    pub max_iters: usize,
    pub trace_stride: usize,
    pub max_seconds: Option<f64>,
    /// JSON file `{"row": [...], "col": [...]}` for `fixed`.
    pub scaling: Option<String>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            name: None,
            algorithm: "split".into(),
            precondition: "none".into(),
            mu: 1.0,
            t: None,
            condition: None,
            tol: 1e-8,
            max_iters: 100_000,
            trace_stride: 1,
            max_seconds: None,
            scaling: None,
        }
    }
}

#[derive(Deserialize)]
struct ScalingFile {
    row: Vec<f64>,
    col: Vec<f64>,
}

fn is_lp(program: &ConicProgram) -> bool {
    program
        .cones
        .blocks()
        .iter()
        .all(|b| b.kind == ConeKind::NonNeg)
}

impl SolverConfig {
    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.algorithm, self.precondition))
    }

    pub fn settings(&self, program: &ConicProgram) -> Result<RunSettings> {
        let algorithm: Algorithm = self.algorithm.parse()?;
        let preconditioner = match self.precondition.as_str() {
            "none" => Preconditioner::None,
            "sinkhorn" => Preconditioner::sinkhorn(),
            "adaptive" => {
                let base = if is_lp(program) {
                    ConditioningPolicy::lp_default()
                } else {
                    ConditioningPolicy::socp_default()
                };
                let schedule = match &self.condition {
                    Some(s) => s.parse::<Schedule>()?,
                    None => base.schedule,
                };
                Preconditioner::Adaptive(ConditioningPolicy::new(
                    schedule,
                    self.t.unwrap_or(base.t),
                )?)
            }
            "fixed" => {
                let path = self
                    .scaling
                    .as_deref()
                    .context("fixed preconditioning needs a scaling file")?;
                let text =
                    std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
                let f: ScalingFile =
                    serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
                Preconditioner::Fixed {
                    row: DVector::from_vec(f.row),
                    col: DVector::from_vec(f.col),
                }
            }
            other => bail!("unknown preconditioner '{other}'"),
        };
        let settings = RunSettings {
            algorithm,
            preconditioner,
            options: SolveOptions {
                mu: self.mu,
                max_iters: self.max_iters,
                tol: Tolerances::uniform(self.tol),
                trace_stride: self.trace_stride,
                max_seconds: self.max_seconds,
                ..Default::default()
            },
            stop: StopRule::Internal,
        };
        settings.validate()?;
        Ok(settings)
    }
}

/// Reference-mode stopping rule from a solution file with `x` and `y`.
pub fn reference_rule(program: &ConicProgram, path: &Path) -> Result<StopRule> {
    let reference =
        read_solution(path).with_context(|| format!("bad reference file {}", path.display()))?;
    let y = reference
        .y
        .as_ref()
        .with_context(|| format!("reference file {} has no y", path.display()))?;
    StopRule::from_reference(program, &reference.x, y)
        .with_context(|| format!("bad reference file {}", path.display()))
}
