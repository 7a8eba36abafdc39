//! JSON problem and solution files.
//!
//! ```json
//! {
//!   "m": 1, "n": 2,
//!   "A": {"dense": [[1.0, 1.0]]},
//!   "b": [1.0], "c": [1.0, 0.0],
//!   "cones": [{"kind": "nonneg", "dim": 2}]
//! }
//! ```
//!
//! `A` may instead be `{"triplets": [[i, j, v], ...]}` with zero-based
//! indices; duplicate entries are summed. Triplet input is stored sparse
//! unless `"sparse": false` is given, and dense input is stored dense unless
//! `"sparse": true` is given.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::matrix::{CsrMatrix, DataMatrix};
use crate::problem::{ConeBlock, ConeKind, ConeSpec, ConicProgram, Solution};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MatrixFile {
    Dense(Vec<Vec<f64>>),
    Triplets(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConeFile {
    kind: String,
    dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProblemFile {
    m: usize,
    n: usize,
    #[serde(rename = "A")]
    a: MatrixFile,
    b: Vec<f64>,
    c: Vec<f64>,
    cones: Vec<ConeFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sparse: Option<bool>,
}

fn format_err(e: impl std::fmt::Display) -> SolverError {
    SolverError::Format(e.to_string())
}

pub fn problem_from_json(text: &str) -> Result<ConicProgram> {
    let file: ProblemFile = serde_json::from_str(text).map_err(format_err)?;
    let (m, n) = (file.m, file.n);
    let a = match file.a {
        MatrixFile::Dense(rows) => {
            if rows.len() != m || rows.iter().any(|r| r.len() != n) {
                return Err(SolverError::DimensionMismatch(format!(
                    "dense A is not {m}×{n}"
                )));
            }
            let dense = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
            if file.sparse == Some(true) {
                DataMatrix::Sparse(CsrMatrix::from_dense(&dense))
            } else {
                DataMatrix::Dense(dense)
            }
        }
        MatrixFile::Triplets(t) => {
            if let Some(&(i, j, _)) = t.iter().find(|&&(i, j, _)| i >= m || j >= n) {
                return Err(SolverError::DimensionMismatch(format!(
                    "triplet ({i}, {j}) outside {m}×{n}"
                )));
            }
            let csr = CsrMatrix::from_triplets(m, n, &t);
            if file.sparse == Some(false) {
                DataMatrix::Dense(csr.to_dense())
            } else {
                DataMatrix::Sparse(csr)
            }
        }
    };
    let blocks = file
        .cones
        .iter()
        .map(|c| match c.kind.as_str() {
            "nonneg" => Ok(ConeBlock::nonneg(c.dim)),
            "soc" => Ok(ConeBlock::lorentz(c.dim)),
            other => Err(SolverError::Format(format!("unknown cone kind '{other}'"))),
        })
        .collect::<Result<Vec<_>>>()?;
    ConicProgram::new(
        a,
        DVector::from_vec(file.b),
        DVector::from_vec(file.c),
        ConeSpec::new(blocks)?,
    )
}

pub fn problem_to_json(program: &ConicProgram) -> String {
    let a = match &program.a {
        DataMatrix::Dense(d) => {
            MatrixFile::Dense(d.row_iter().map(|r| r.iter().copied().collect()).collect())
        }
        DataMatrix::Sparse(s) => {
            let d = s.to_dense();
            let mut t = Vec::with_capacity(s.nnz());
            for i in 0..d.nrows() {
                for j in 0..d.ncols() {
                    if d[(i, j)] != 0.0 {
                        t.push((i, j, d[(i, j)]));
                    }
                }
            }
            MatrixFile::Triplets(t)
        }
    };
    let cones = program
        .cones
        .blocks()
        .iter()
        .map(|b| ConeFile {
            kind: match b.kind {
                ConeKind::NonNeg => "nonneg",
                ConeKind::Lorentz => "soc",
            }
            .into(),
            dim: b.dim,
        })
        .collect();
    let file = ProblemFile {
        m: program.m(),
        n: program.n(),
        a,
        b: program.b.iter().copied().collect(),
        c: program.c.iter().copied().collect(),
        cones,
        sparse: None,
    };
    serde_json::to_string(&file).expect("serializable")
}

pub fn read_problem(path: &Path) -> Result<ConicProgram> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SolverError::Format(format!("{}: {e}", path.display())))?;
    problem_from_json(&text)
}

pub fn write_problem(path: &Path, program: &ConicProgram) -> Result<()> {
    std::fs::write(path, problem_to_json(program))
        .map_err(|e| SolverError::Format(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SolutionFile {
    x: Vec<f64>,
    z: Vec<f64>,
    y: Option<Vec<f64>>,
    primal_obj: f64,
    dual_obj: f64,
}

pub fn solution_to_json(solution: &Solution) -> String {
    let file = SolutionFile {
        x: solution.x.iter().copied().collect(),
        z: solution.z.iter().copied().collect(),
        y: solution.y.as_ref().map(|y| y.iter().copied().collect()),
        primal_obj: solution.primal_obj,
        dual_obj: solution.dual_obj,
    };
    serde_json::to_string_pretty(&file).expect("serializable")
}

pub fn solution_from_json(text: &str) -> Result<Solution> {
    let f: SolutionFile = serde_json::from_str(text).map_err(format_err)?;
    if f.x.len() != f.z.len() {
        return Err(SolverError::DimensionMismatch(
            "x and z lengths differ".into(),
        ));
    }
    Ok(Solution {
        x: DVector::from_vec(f.x),
        z: DVector::from_vec(f.z),
        y: f.y.map(DVector::from_vec),
        primal_obj: f.primal_obj,
        dual_obj: f.dual_obj,
    })
}

pub fn read_solution(path: &Path) -> Result<Solution> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SolverError::Format(format!("{}: {e}", path.display())))?;
    solution_from_json(&text)
}
