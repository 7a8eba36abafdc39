//! Storage for the constraint matrix `A`.
//!
//! Dense storage is the default. A compressed-sparse-row form is available for
//! inputs given as triplets; the factorization always works on a dense copy.

use nalgebra::{DMatrix, DVector};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            if last == Some((i, j)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
            last = Some((i, j));
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &triplets)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[(i, self.col_idx[k])] += self.values[k];
            }
        }
        out
    }

    fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.nrows, |i, _| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(|k| self.values[k] * x[self.col_idx[k]])
                .sum()
        })
    }

    fn tr_mul_vec(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols);
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.col_idx[k]] += self.values[k] * y[i];
            }
        }
        out
    }
}

/// The constraint matrix in either storage form.
#[derive(Debug, Clone, PartialEq)]
pub enum DataMatrix {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

impl DataMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            DataMatrix::Dense(a) => a.nrows(),
            DataMatrix::Sparse(a) => a.nrows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            DataMatrix::Dense(a) => a.ncols(),
            DataMatrix::Sparse(a) => a.ncols,
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            DataMatrix::Dense(a) => a * x,
            DataMatrix::Sparse(a) => a.mul_vec(x),
        }
    }

    pub fn tr_mul_vec(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            DataMatrix::Dense(a) => a.tr_mul(y),
            DataMatrix::Sparse(a) => a.tr_mul_vec(y),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            DataMatrix::Dense(a) => a.clone(),
            DataMatrix::Sparse(a) => a.to_dense(),
        }
    }

    /// Stored entries; for dense storage this is every entry.
    pub fn values(&self) -> &[f64] {
        match self {
            DataMatrix::Dense(a) => a.as_slice(),
            DataMatrix::Sparse(a) => &a.values,
        }
    }

    /// Returns `diag(row) * A * diag(col)` in the same storage form.
    pub fn scaled(&self, row: &[f64], col: &[f64]) -> DataMatrix {
        match self {
            DataMatrix::Dense(a) => {
                DataMatrix::Dense(DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
                    row[i] * a[(i, j)] * col[j]
                }))
            }
            DataMatrix::Sparse(a) => {
                let mut out = a.clone();
                for (i, r) in row.iter().enumerate() {
                    for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                        out.values[k] *= r * col[a.col_idx[k]];
                    }
                }
                DataMatrix::Sparse(out)
            }
        }
    }

    pub fn into_sparse(self) -> DataMatrix {
        match self {
            DataMatrix::Dense(a) => DataMatrix::Sparse(CsrMatrix::from_dense(&a)),
            s => s,
        }
    }
}

impl From<DMatrix<f64>> for DataMatrix {
    fn from(a: DMatrix<f64>) -> Self {
        DataMatrix::Dense(a)
    }
}
