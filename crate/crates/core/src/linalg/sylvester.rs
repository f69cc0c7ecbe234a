//! Symmetric Sylvester equations `H X + lambda^2 X M = R`.
//!
//! `M` is the small `T x T` time Gram matrix. With `M = Q diag(w) Q^T` the
//! substitution `Z = X Q` decouples the equation into `T` shifted systems
//! `(H + lambda^2 w_k I) z_k = (R Q)_k`, each solved by Cholesky.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{Cholesky, DenseMatrix, LinalgError, TemporalField};

/// Factored Sylvester operator, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct SylvesterSolver {
    n: usize,
    q: DenseMatrix,
    /// Index into `factors` for each eigenvector column.
    factor_of: Vec<usize>,
    factors: Vec<Cholesky>,
}

impl SylvesterSolver {
    pub fn new(hth: &DenseMatrix, m: &DenseMatrix, lambda2: f64) -> Result<Self, LinalgError> {
        let n = hth.rows();
        if hth.cols() != n {
            return Err(LinalgError::DimensionMismatch {
                op: "sylvester (H)",
                expected: (n, n),
                got: hth.shape(),
            });
        }
        let t = m.rows();
        if m.cols() != t {
            return Err(LinalgError::DimensionMismatch {
                op: "sylvester (M)",
                expected: (t, t),
                got: m.shape(),
            });
        }
        check_symmetric(hth)?;
        check_symmetric(m)?;

        let eig = SymmetricEigen::try_new(
            DMatrix::from_row_slice(t, t, m.as_slice()),
            f64::EPSILON,
            0,
        )
        .ok_or(LinalgError::EigenFailure)?;
        let q = DenseMatrix::from_fn(t, t, |i, j| eig.eigenvectors[(i, j)]);

        let mut shifts: Vec<f64> = Vec::new();
        let mut factors = Vec::new();
        let mut factor_of = Vec::with_capacity(t);
        for k in 0..t {
            // M is PSD; rounding can leave tiny negative eigenvalues.
            let shift = lambda2 * eig.eigenvalues[k].max(0.0);
            match shifts.iter().position(|&s| s == shift) {
                Some(idx) => factor_of.push(idx),
                None => {
                    factors.push(Cholesky::factor_shifted(hth, shift)?);
                    shifts.push(shift);
                    factor_of.push(factors.len() - 1);
                }
            }
        }
        Ok(Self {
            n,
            q,
            factor_of,
            factors,
        })
    }

    /// Number of distinct Cholesky factorizations held.
    pub fn num_factorizations(&self) -> usize {
        self.factors.len()
    }

    /// Approximate flop count of the factorization phase.
    pub fn factor_flops(&self) -> f64 {
        let n = self.n as f64;
        self.factors.len() as f64 * n * n * n / 3.0
    }

    /// Approximate flop count of one [`SylvesterSolver::solve`].
    pub fn solve_flops(&self) -> f64 {
        let n = self.n as f64;
        let t = self.q.rows() as f64;
        2.0 * n * n * t + 4.0 * n * t * t
    }

    pub fn solve(&self, rhs: &DenseMatrix) -> Result<TemporalField, LinalgError> {
        let t = self.q.rows();
        if rhs.shape() != (self.n, t) {
            return Err(LinalgError::DimensionMismatch {
                op: "sylvester solve",
                expected: (self.n, t),
                got: rhs.shape(),
            });
        }
        let rq = rhs.matmul(&self.q)?;
        let mut z = DenseMatrix::zeros(self.n, t);
        let mut col = vec![0.0; self.n];
        for k in 0..t {
            for (i, c) in col.iter_mut().enumerate() {
                *c = rq[(i, k)];
            }
            self.factors[self.factor_of[k]].solve_in_place(&mut col);
            z.set_column(k, &col);
        }
        z.matmul_t(&self.q)
    }
}

/// Solves `HtH X + lambda2 X M = RHS` for symmetric positive definite `HtH`
/// and symmetric positive semidefinite `M`.
pub fn solve_sylvester(
    hth: &DenseMatrix,
    m: &DenseMatrix,
    lambda2: f64,
    rhs: &DenseMatrix,
) -> Result<TemporalField, LinalgError> {
    SylvesterSolver::new(hth, m, lambda2)?.solve(rhs)
}

fn check_symmetric(a: &DenseMatrix) -> Result<(), LinalgError> {
    let asym = a.max_asymmetry();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    if asym > 1e-10 * scale {
        return Err(LinalgError::NotSymmetric(asym));
    }
    Ok(())
}
