//! Dense and sparse kernels, matrix-free operators, and the Sylvester solver
//! behind the ADMM x-update.

mod cholesky;
mod dense;
pub mod io;
mod operator;
mod sparse;
mod sylvester;

pub use cholesky::Cholesky;
pub use dense::{dot, DenseMatrix, TemporalField};
pub use operator::{
    adjoint_mismatch, KronLeftOperator, LinearOperator, ScaledOperator, StackedOperator,
    TimeDifferenceOperator,
};
pub use sparse::SparseMatrix;
pub use sylvester::{solve_sylvester, SylvesterSolver};

pub(crate) use dense::{axpy_slice, gemm_nn, gemm_tn};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("data length mismatch: expected {expected}, got {got}")]
    InvalidData { expected: usize, got: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is singular or not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("time dimension too small: need at least {needed} time points, got {got}")]
    TooFewTimePoints { needed: usize, got: usize },
    #[error("entry ({row}, {col}) out of range for a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("non-finite value {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error("eigendecomposition failed to converge")]
    EigenFailure,
}

/// `L X`, the matrix form of `(I_T (x) L) vec(X)`.
pub fn kron_left_apply(l: &DenseMatrix, x: &TemporalField) -> Result<TemporalField, LinalgError> {
    if l.cols() != x.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "kron_left_apply",
            expected: (l.cols(), x.cols()),
            got: x.shape(),
        });
    }
    let mut out = DenseMatrix::zeros(l.rows(), x.cols());
    gemm_nn(l, x, &mut out);
    Ok(out)
}

/// `L^T Y`, the adjoint of [`kron_left_apply`].
pub fn kron_left_adjoint(l: &DenseMatrix, y: &TemporalField) -> Result<TemporalField, LinalgError> {
    if l.rows() != y.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "kron_left_adjoint",
            expected: (l.rows(), y.cols()),
            got: y.shape(),
        });
    }
    let mut out = DenseMatrix::zeros(l.cols(), y.cols());
    gemm_tn(l, y, &mut out);
    Ok(out)
}

/// `X D1`: column `i` of the result is `x_i - x_{i+1}`.
///
/// Matrix form of `(D1^T (x) I_n) vec(X)`.
pub fn kron_right_apply(x: &TemporalField) -> Result<TemporalField, LinalgError> {
    let (n, t) = x.shape();
    if t < 2 {
        return Err(LinalgError::TooFewTimePoints { needed: 2, got: t });
    }
    let mut out = DenseMatrix::zeros(n, t - 1);
    for i in 0..n {
        let src = x.row(i);
        for (o, w) in out.row_mut(i).iter_mut().zip(src.windows(2)) {
            *o = w[0] - w[1];
        }
    }
    Ok(out)
}

/// `Y D1^T`, the adjoint of [`kron_right_apply`]; maps `n x (T-1)` to `n x T`.
pub fn kron_right_adjoint(y: &TemporalField) -> Result<TemporalField, LinalgError> {
    let (n, tm1) = y.shape();
    let t = tm1 + 1;
    let mut out = DenseMatrix::zeros(n, t);
    for i in 0..n {
        let src = y.row(i);
        let dst = out.row_mut(i);
        for (k, &v) in src.iter().enumerate() {
            dst[k] += v;
            dst[k + 1] -= v;
        }
    }
    Ok(out)
}

/// `D1 D1^T` as a dense `T x T` matrix: tridiagonal with diagonal
/// `(1, 2, ..., 2, 1)` and off-diagonals `-1`.
pub fn timediff_gram_matrix(t: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(t, t);
    for k in 0..t.saturating_sub(1) {
        m[(k, k)] += 1.0;
        m[(k + 1, k + 1)] += 1.0;
        m[(k, k + 1)] -= 1.0;
        m[(k + 1, k)] -= 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_left_identity_and_hand_case() {
        let x = DenseMatrix::from_rows(&[[1.0, -2.0], [0.5, 3.0], [7.0, 0.0]]);
        assert_eq!(kron_left_apply(&DenseMatrix::identity(3), &x).unwrap(), x);
        let l = DenseMatrix::from_rows(&[[1.0, 1.0]]);
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(
            kron_left_apply(&l, &x).unwrap(),
            DenseMatrix::from_rows(&[[4.0, 6.0]])
        );
        assert!(kron_left_apply(&l, &DenseMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn time_difference_hand_cases() {
        let x = DenseMatrix::from_rows(&[[1.0, 3.0, 6.0]]);
        assert_eq!(
            kron_right_apply(&x).unwrap(),
            DenseMatrix::from_rows(&[[-2.0, -3.0]])
        );
        let c = DenseMatrix::from_rows(&[[2.5, 2.5], [-1.0, -1.0]]);
        assert_eq!(kron_right_apply(&c).unwrap(), DenseMatrix::zeros(2, 1));
        assert!(matches!(
            kron_right_apply(&DenseMatrix::zeros(3, 1)),
            Err(LinalgError::TooFewTimePoints { .. })
        ));
    }

    #[test]
    fn gram_matrix_matches_composition() {
        let m = timediff_gram_matrix(4);
        let expected = DenseMatrix::from_rows(&[
            [1.0, -1.0, 0.0, 0.0],
            [-1.0, 2.0, -1.0, 0.0],
            [0.0, -1.0, 2.0, -1.0],
            [0.0, 0.0, -1.0, 1.0],
        ]);
        assert_eq!(m, expected);
        assert_eq!(timediff_gram_matrix(1), DenseMatrix::zeros(1, 1));
    }
}
