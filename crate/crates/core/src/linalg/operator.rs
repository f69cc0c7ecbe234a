//! Matrix-free linear operators acting on vectorized fields.
//!
//! Vectors are column-major vectorizations (`vec(X)`), so `I_T (x) L` acts
//! blockwise on the time columns of `X`.

use super::{dot, kron_left_adjoint, kron_left_apply, kron_right_adjoint, kron_right_apply};
use super::DenseMatrix;

/// A linear map `R^domain -> R^range` with its adjoint.
pub trait LinearOperator {
    fn domain_dim(&self) -> usize;
    fn range_dim(&self) -> usize;
    /// `out = A x`.
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = A^T y`.
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.range_dim()];
        self.apply(x, &mut out);
        out
    }

    fn apply_adjoint_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.domain_dim()];
        self.apply_adjoint(y, &mut out);
        out
    }
}

/// Relative adjoint defect `|<Av, u> - <v, A^T u>| / (||Av|| ||u|| + ||v|| ||A^T u||)`.
pub fn adjoint_mismatch<A: LinearOperator + ?Sized>(op: &A, v: &[f64], u: &[f64]) -> f64 {
    let av = op.apply_vec(v);
    let atu = op.apply_adjoint_vec(u);
    let lhs = dot(&av, u);
    let rhs = dot(v, &atu);
    let scale = dot(&av, &av).sqrt() * dot(u, u).sqrt() + dot(v, v).sqrt() * dot(&atu, &atu).sqrt();
    if scale == 0.0 {
        return (lhs - rhs).abs();
    }
    (lhs - rhs).abs() / scale
}

impl LinearOperator for DenseMatrix {
    fn domain_dim(&self) -> usize {
        self.cols()
    }

    fn range_dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            super::axpy_slice(yi, self.row(i), out);
        }
    }
}

/// `I_T (x) L`, applied as `L X` without materializing the Kronecker product.
#[derive(Debug, Clone, Copy)]
pub struct KronLeftOperator<'a> {
    pub l: &'a DenseMatrix,
    pub t: usize,
}

impl LinearOperator for KronLeftOperator<'_> {
    fn domain_dim(&self) -> usize {
        self.l.cols() * self.t
    }

    fn range_dim(&self) -> usize {
        self.l.rows() * self.t
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let xm = DenseMatrix::unvec(self.l.cols(), self.t, x).expect("domain size");
        let y = kron_left_apply(self.l, &xm).expect("shapes checked");
        out.copy_from_slice(&y.vec());
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let ym = DenseMatrix::unvec(self.l.rows(), self.t, y).expect("range size");
        let x = kron_left_adjoint(self.l, &ym).expect("shapes checked");
        out.copy_from_slice(&x.vec());
    }
}

/// `D1^T (x) I_n`: maps `vec(X)` to `vec(X D1)`.
#[derive(Debug, Clone, Copy)]
pub struct TimeDifferenceOperator {
    pub n: usize,
    pub t: usize,
}

impl LinearOperator for TimeDifferenceOperator {
    fn domain_dim(&self) -> usize {
        self.n * self.t
    }

    fn range_dim(&self) -> usize {
        self.n * (self.t - 1)
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let xm = DenseMatrix::unvec(self.n, self.t, x).expect("domain size");
        out.copy_from_slice(&kron_right_apply(&xm).expect("T >= 2").vec());
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let ym = DenseMatrix::unvec(self.n, self.t - 1, y).expect("range size");
        out.copy_from_slice(&kron_right_adjoint(&ym).expect("shapes checked").vec());
    }
}

/// `scale * A`.
pub struct ScaledOperator<A> {
    pub scale: f64,
    pub inner: A,
}

impl<A: LinearOperator> LinearOperator for ScaledOperator<A> {
    fn domain_dim(&self) -> usize {
        self.inner.domain_dim()
    }

    fn range_dim(&self) -> usize {
        self.inner.range_dim()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.inner.apply(x, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        self.inner.apply_adjoint(y, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }
}

/// Vertical stack `[A; B]` of two operators with a shared domain.
pub struct StackedOperator<A, B> {
    pub top: A,
    pub bottom: B,
}

impl<A: LinearOperator, B: LinearOperator> LinearOperator for StackedOperator<A, B> {
    fn domain_dim(&self) -> usize {
        self.top.domain_dim()
    }

    fn range_dim(&self) -> usize {
        self.top.range_dim() + self.bottom.range_dim()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (a, b) = out.split_at_mut(self.top.range_dim());
        self.top.apply(x, a);
        self.bottom.apply(x, b);
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let (a, b) = y.split_at(self.top.range_dim());
        self.top.apply_adjoint(a, out);
        let extra = self.bottom.apply_adjoint_vec(b);
        for (o, e) in out.iter_mut().zip(extra) {
            *o += e;
        }
    }
}
