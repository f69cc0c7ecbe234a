use super::{DenseMatrix, LinalgError, LinearOperator};

/// Compressed-row sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicates are rejected.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut sorted = triplets.to_vec();
        for &(r, c, v) in &sorted {
            if r >= rows || c >= cols {
                return Err(LinalgError::IndexOutOfRange {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
            if !v.is_finite() {
                return Err(LinalgError::NonFinite {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(LinalgError::DuplicateEntry {
                    row: w[0].0,
                    col: w[0].1,
                });
            }
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &sorted {
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx: sorted.iter().map(|t| t.1).collect(),
            values: sorted.iter().map(|t| t.2).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `r` as `(col, value)`.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    /// `self * X` for a dense `X`.
    pub fn matmul_dense(&self, x: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if x.rows() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                op: "sparse matmul",
                expected: (self.cols, x.cols()),
                got: x.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, x.cols());
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                super::axpy_slice(v, x.row(c), out.row_mut(r));
            }
        }
        Ok(out)
    }
}

impl LinearOperator for SparseMatrix {
    fn domain_dim(&self) -> usize {
        self.cols
    }

    fn range_dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            *o = self.row_entries(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, &yr) in y.iter().enumerate().take(self.rows) {
            for (c, v) in self.row_entries(r) {
                out[c] += v * yr;
            }
        }
    }
}
