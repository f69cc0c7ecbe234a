use super::{dot, DenseMatrix, LinalgError};

/// Lower-triangular Cholesky factor `A = G G^T` stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    g: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &DenseMatrix) -> Result<Self, LinalgError> {
        Self::factor_shifted(a, 0.0)
    }

    /// Factors `A + shift * I`. Only the lower triangle of `a` is read.
    ///
    /// A pivot below `n * eps * max_diag` is reported as
    /// [`LinalgError::NotPositiveDefinite`].
    pub fn factor_shifted(a: &DenseMatrix, shift: f64) -> Result<Self, LinalgError> {
        let n = a.rows();
        if a.cols() != n {
            return Err(LinalgError::DimensionMismatch {
                op: "cholesky",
                expected: (n, n),
                got: a.shape(),
            });
        }
        let max_diag = (0..n).fold(0.0f64, |m, i| m.max((a[(i, i)] + shift).abs()));
        let tol = (n.max(1) as f64) * f64::EPSILON * max_diag;
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            let (done, rest) = g.split_at_mut(i * n);
            let gi = &mut rest[..n];
            for j in 0..i {
                let gj = &done[j * n..j * n + j];
                let s = a[(i, j)] - dot(&gi[..j], gj);
                gi[j] = s / done[j * n + j];
            }
            let d = a[(i, i)] + shift - dot(&gi[..i], &gi[..i]);
            if !(d > tol) {
                return Err(LinalgError::NotPositiveDefinite { row: i, pivot: d });
            }
            gi[i] = d.sqrt();
        }
        Ok(Self { n, g })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let row = &self.g[i * n..i * n + i];
            b[i] = (b[i] - dot(row, &b[..i])) / self.g[i * n + i];
        }
        for i in (0..n).rev() {
            let xi = b[i] / self.g[i * n + i];
            b[i] = xi;
            let row = &self.g[i * n..i * n + i];
            for (bk, &gik) in b[..i].iter_mut().zip(row) {
                *bk -= gik * xi;
            }
        }
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if b.rows() != self.n {
            return Err(LinalgError::DimensionMismatch {
                op: "cholesky solve",
                expected: (self.n, b.cols()),
                got: b.shape(),
            });
        }
        let mut out = b.clone();
        let mut col = vec![0.0; self.n];
        for j in 0..b.cols() {
            for (i, c) in col.iter_mut().enumerate() {
                *c = b[(i, j)];
            }
            self.solve_in_place(&mut col);
            out.set_column(j, &col);
        }
        Ok(out)
    }

    /// Reconstructs `G G^T`; test support.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.n;
        let g = DenseMatrix::from_vec(n, n, self.g.clone()).expect("square factor");
        g.matmul_t(&g).expect("square factor")
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.g[i * self.n + i].ln()).sum()
    }
}
