//! Benchmark matrix: every cell crossed with every solver configuration.
//!
//! ```json
//! {
//!   "cells": [
//!     {"family": "lp-normal", "n": 100, "seeds": [0, 1, 2]},
//!     {"problem": "prob.json"}
//!   ],
//!   "configs": [
//!     {"name": "none"},
//!     {"name": "once", "precondition": "adaptive", "condition": "once:300"}
//!   ],
//!   "trace_dir": "traces"
//! }
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use conic_split::generators::{generate, Family, GenSpec};
use conic_split::io::read_problem;
use conic_split::{solve_observed, ConicProgram, SolverError, TraceRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::trace::write_trace_file;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub family: Option<String>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub cone_size: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub problem: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    #[serde(default)]
    pub cells: Vec<CellSpec>,
    #[serde(default)]
    pub configs: Vec<SolverConfig>,
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub label: String,
    pub family: String,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    source: CellSource,
}

#[derive(Debug, Clone)]
enum CellSource {
    Generated(GenSpec),
    File(PathBuf),
}

impl Cell {
    fn load(&self) -> Result<ConicProgram, SolverError> {
        match &self.source {
            CellSource::Generated(spec) => generate(spec).map(|(p, _)| p),
            CellSource::File(path) => read_problem(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub cell: String,
    pub family: String,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub config: String,
    pub status: String,
    pub iterations: Option<usize>,
    pub primal_res: Option<f64>,
    pub dual_res: Option<f64>,
    pub gap: Option<f64>,
    /// `max(primal_res, dual_res, gap)`
    pub combined: Option<f64>,
    pub primal_obj: Option<f64>,
    pub conditioning_events: Option<usize>,
    pub wall_ms: Option<f64>,
    pub failed: Option<String>,
}

impl BenchSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut spec: BenchSpec =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for cell in &mut spec.cells {
            if let Some(p) = &mut cell.problem {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        if let Some(dir) = &mut spec.trace_dir {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(spec)
    }

    /// Expands `seeds` lists into one cell per seed.
    pub fn expand_cells(&self) -> Result<Vec<Cell>> {
        let mut cells = Vec::new();
        for c in &self.cells {
            if let Some(path) = &c.problem {
                if c.family.is_some() || c.n.is_some() {
                    bail!("a cell has both a problem file and a generator");
                }
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                cells.push(Cell {
                    label: stem,
                    family: "file".into(),
                    n: None,
                    seed: None,
                    source: CellSource::File(path.clone()),
                });
                continue;
            }
            let family: Family = c
                .family
                .as_deref()
                .context("cell needs a family or a problem file")?
                .parse()?;
            let n = c.n.context("generated cell needs n")?;
            let seeds = match (&c.seeds, c.seed) {
                (Some(list), None) => list.clone(),
                (None, Some(s)) => vec![s],
                (None, None) => vec![0],
                (Some(_), Some(_)) => bail!("give either seed or seeds, not both"),
            };
            for seed in seeds {
                let mut spec = GenSpec::new(family, n, seed);
                spec.m = c.m;
                if let Some(h) = c.cone_size {
                    spec.cone_size = h;
                }
                cells.push(Cell {
                    label: format!("{family}-n{n}-s{seed}"),
                    family: family.to_string(),
                    n: Some(n),
                    seed: Some(seed),
                    source: CellSource::Generated(spec),
                });
            }
        }
        Ok(cells)
    }
}

fn failed_row(cell: &Cell, config: &SolverConfig, err: &SolverError) -> BenchRow {
    let kind = match err {
        SolverError::RankDeficient { .. } => "RankDeficient".to_string(),
        SolverError::Diverged { .. } => "Diverged".to_string(),
        SolverError::NonFinite { .. } => "NonFinite".to_string(),
        other => format!("{other}"),
    };
    BenchRow {
        cell: cell.label.clone(),
        family: cell.family.clone(),
        n: cell.n,
        seed: cell.seed,
        config: config.label(),
        status: "failed".into(),
        iterations: None,
        primal_res: None,
        dual_res: None,
        gap: None,
        combined: None,
        primal_obj: None,
        conditioning_events: None,
        wall_ms: None,
        failed: Some(kind),
    }
}

fn run_one(
    cell: &Cell,
    program: &ConicProgram,
    config: &SolverConfig,
    trace_dir: Option<&Path>,
    timing: bool,
) -> BenchRow {
    let settings = match config.settings(program) {
        Ok(s) => s,
        Err(e) => return failed_row(cell, config, &SolverError::InvalidOptions(format!("{e:#}"))),
    };
    let projector = match program.projector() {
        Ok(p) => Arc::new(p),
        Err(e) => return failed_row(cell, config, &e),
    };
    let stride = settings.options.trace_stride;
    let mut partial: Vec<TraceRecord> = Vec::new();
    let result = solve_observed(program, projector, &settings, |view| {
        if trace_dir.is_some() && (view.record.iter % stride == 0 || view.record.conditioning_event)
        {
            partial.push(*view.record);
        }
    });
    let trace = match &result {
        Ok(report) => &report.trace,
        Err(_) => &partial,
    };
    if let Some(dir) = trace_dir {
        let path = dir.join(format!("{}__{}.csv", cell.label, config.label()));
        if let Err(e) = write_trace_file(&path, trace, timing) {
            return failed_row(cell, config, &SolverError::Format(format!("{e:#}")));
        }
    }
    match result {
        Ok(report) => {
            let r = report.residuals;
            BenchRow {
                cell: cell.label.clone(),
                family: cell.family.clone(),
                n: cell.n,
                seed: cell.seed,
                config: config.label(),
                status: report.status.to_string(),
                iterations: Some(report.iterations),
                primal_res: Some(r.primal_res),
                dual_res: Some(r.dual_res),
                gap: Some(r.gap),
                combined: Some(r.combined()),
                primal_obj: Some(report.solution.primal_obj),
                conditioning_events: Some(report.conditioning_events.len()),
                wall_ms: timing.then_some(report.wall_ms),
                failed: None,
            }
        }
        Err(e) => failed_row(cell, config, &e),
    }
}

/// Runs the matrix on the current rayon pool. Rows come out cell-major in
/// file order regardless of scheduling.
pub fn run_bench(spec: &BenchSpec, timing: bool) -> Result<Vec<BenchRow>> {
    let cells = spec.expand_cells()?;
    if let Some(dir) = &spec.trace_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let configs = if spec.configs.is_empty() && !cells.is_empty() {
        vec![SolverConfig::default()]
    } else {
        spec.configs.clone()
    };
    let rows = cells
        .par_iter()
        .flat_map_iter(|cell| {
            let rows: Vec<BenchRow> = match cell.load() {
                Ok(program) => configs
                    .iter()
                    .map(|config| {
                        run_one(cell, &program, config, spec.trace_dir.as_deref(), timing)
                    })
                    .collect(),
                Err(e) => configs
                    .iter()
                    .map(|config| failed_row(cell, config, &e))
                    .collect(),
            };
            rows
        })
        .collect();
    Ok(rows)
}

pub fn write_rows<W: std::io::Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "cell",
            "family",
            "n",
            "seed",
            "config",
            "status",
            "iterations",
            "primal_res",
            "dual_res",
            "gap",
            "combined",
            "primal_obj",
            "conditioning_events",
            "wall_ms",
            "failed",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(text: &str) -> BenchSpec {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn empty_matrix_gives_header_only() {
        let rows = run_bench(&BenchSpec::default(), false).unwrap();
        assert!(rows.is_empty());
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }

    #[test]
    fn seeds_expand_cell_major() {
        let s = spec(
            r#"{"cells":[{"family":"lp-normal","n":12,"seeds":[0,1]}],
                "configs":[{"name":"a","max_iters":20},{"name":"b","max_iters":20,"precondition":"sinkhorn"}]}"#,
        );
        let rows = run_bench(&s, false).unwrap();
        let keys: Vec<(String, String)> = rows
            .iter()
            .map(|r| (r.cell.clone(), r.config.clone()))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("lp-normal-n12-s0".into(), "a".into()),
                ("lp-normal-n12-s0".into(), "b".into()),
                ("lp-normal-n12-s1".into(), "a".into()),
                ("lp-normal-n12-s1".into(), "b".into()),
            ]
        );
        assert!(rows
            .iter()
            .all(|r| r.wall_ms.is_none() && r.iterations == Some(20)));
    }

    #[test]
    fn bad_cells_are_rejected_or_recorded() {
        assert!(spec(r#"{"cells":[{"n":10}]}"#).expand_cells().is_err());
        assert!(
            spec(r#"{"cells":[{"family":"lp-normal","n":10,"seed":1,"seeds":[2]}]}"#)
                .expand_cells()
                .is_err()
        );
        let rows = run_bench(
            &spec(r#"{"cells":[{"family":"socp","n":10,"cone_size":3}]}"#),
            false,
        )
        .unwrap();
        assert_eq!(rows[0].status, "failed");
        assert!(rows[0].failed.is_some());
    }
}
