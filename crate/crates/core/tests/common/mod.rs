//! Independent LP oracles for standard-form problems `min cᵀx, Ax = b, x ≥ 0`.
#![allow(dead_code)]

use conic_split::ConicProgram;
use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub enum Oracle {
    Optimal {
        x: DVector<f64>,
        z: DVector<f64>,
        objective: f64,
    },
    Unbounded,
    Infeasible,
}

/// Simplex solve through microlp. Returns the objective and primal point.
pub fn simplex(program: &ConicProgram) -> Oracle {
    let a = program.dense_a();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = program
        .c
        .iter()
        .map(|&cj| lp.add_var(cj, (0.0, f64::INFINITY)))
        .collect();
    for i in 0..a.nrows() {
        let terms: Vec<_> = vars
            .iter()
            .enumerate()
            .map(|(j, &v)| (v, a[(i, j)]))
            .collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, program.b[i]);
    }
    match lp.solve() {
        Ok(outcome) => {
            let sol = outcome.into_solution().expect("no limits configured");
            let x = DVector::from_iterator(vars.len(), vars.iter().map(|&v| sol.var_value(v)));
            Oracle::Optimal {
                objective: sol.objective(),
                x,
                z: DVector::zeros(0),
            }
        }
        Err(microlp::Error::Unbounded) => Oracle::Unbounded,
        Err(microlp::Error::Infeasible) => Oracle::Infeasible,
        Err(e) => panic!("oracle failed: {e:?}"),
    }
}

fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exhaustive basis enumeration. Unboundedness is decided by `simplex`; the
/// optimum, a complementary dual slack `z = c − Aᵀy ≥ 0` and the vertex come
/// from the enumeration alone.
pub fn vertex_enumeration(program: &ConicProgram) -> Oracle {
    match simplex(program) {
        Oracle::Optimal { .. } => {}
        other => return other,
    }
    let a = program.dense_a();
    let (m, n) = a.shape();
    let tol = 1e-9;
    let mut vertices: Vec<(f64, Vec<usize>, DVector<f64>)> = Vec::new();
    for_each_combination(n, m, |basis| {
        let b_mat = DMatrix::from_fn(m, m, |i, k| a[(i, basis[k])]);
        let lu = b_mat.clone().lu();
        let Some(xb) = lu.solve(&program.b) else {
            return;
        };
        let cond_ok = b_mat.clone().svd(false, false).singular_values;
        if cond_ok.min() <= 1e-10 * cond_ok.max() {
            return;
        }
        if xb.iter().any(|&v| v < -tol) {
            return;
        }
        let obj: f64 = basis
            .iter()
            .zip(xb.iter())
            .map(|(&j, &v)| program.c[j] * v)
            .sum();
        vertices.push((obj, basis.to_vec(), xb));
    });
    let best = vertices.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    for (obj, basis, xb) in &vertices {
        if (obj - best).abs() > 1e-9 * best.abs().max(1.0) {
            continue;
        }
        let b_mat = DMatrix::from_fn(m, m, |i, k| a[(i, basis[k])]);
        let cb = DVector::from_iterator(m, basis.iter().map(|&j| program.c[j]));
        let y = b_mat
            .transpose()
            .lu()
            .solve(&cb)
            .expect("nonsingular basis");
        let z = &program.c - a.transpose() * &y;
        if z.iter().all(|&v| v >= -tol) {
            let mut x = DVector::zeros(n);
            for (&j, &v) in basis.iter().zip(xb.iter()) {
                x[j] = v.max(0.0);
            }
            let z = z.map(|v| v.max(0.0));
            return Oracle::Optimal {
                x,
                z,
                objective: *obj,
            };
        }
    }
    panic!("bounded LP without a dual-feasible optimal basis");
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
