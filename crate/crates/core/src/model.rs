//! The regularized inverse problem
//!
//! `f(X) = 1/2 ||L X - B||^2 + lambda^2/2 ||X D1||^2 + mu ||D2 X||_1`
//!
//! and its split form with auxiliary `Y ~ D2 X` and scaled multipliers `C`.

use std::sync::Arc;

use thiserror::Error;

use crate::graph::{
    graphtv_adjoint_acc, graphtv_apply, graphtv_apply_into, timediff_gram_acc, timediff_norm_sq,
    GraphError, MeshGraph,
};
use crate::linalg::{gemm_nn, gemm_tn, DenseMatrix, LinalgError, TemporalField};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what}: expected shape {expected:?}, got {got:?}")]
    Shape {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Forward operator `L`.
#[derive(Debug, Clone)]
pub enum Forward {
    Dense(Arc<DenseMatrix>),
    /// `L = I_n`, used by denoising subproblems.
    Identity(usize),
}

impl Forward {
    pub fn rows(&self) -> usize {
        match self {
            Forward::Dense(l) => l.rows(),
            Forward::Identity(n) => *n,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Forward::Dense(l) => l.cols(),
            Forward::Identity(n) => *n,
        }
    }

    /// `L X`.
    pub fn apply(&self, x: &TemporalField) -> TemporalField {
        let mut out = DenseMatrix::zeros(self.rows(), x.cols());
        self.apply_into(x, &mut out);
        out
    }

    /// `out = L X` into a buffer of the right shape.
    pub fn apply_into(&self, x: &TemporalField, out: &mut TemporalField) {
        match self {
            Forward::Dense(l) => {
                out.fill(0.0);
                gemm_nn(l, x, out);
            }
            Forward::Identity(_) => out.as_mut_slice().copy_from_slice(x.as_slice()),
        }
    }

    /// `out += alpha * L^T Y`.
    pub fn adjoint_acc(&self, alpha: f64, y: &TemporalField, out: &mut TemporalField) {
        match self {
            Forward::Dense(l) => {
                if alpha == 1.0 {
                    gemm_tn(l, y, out);
                } else {
                    let mut tmp = DenseMatrix::zeros(l.cols(), y.cols());
                    gemm_tn(l, y, &mut tmp);
                    out.axpy(alpha, &tmp);
                }
            }
            Forward::Identity(_) => out.axpy(alpha, y),
        }
    }

    /// `L^T L` as a dense matrix.
    pub fn gram(&self) -> DenseMatrix {
        match self {
            Forward::Dense(l) => l.gram(),
            Forward::Identity(n) => DenseMatrix::identity(*n),
        }
    }

    /// Approximate flops of one `L X` with `t` columns.
    pub fn apply_flops(&self, t: usize) -> f64 {
        match self {
            Forward::Dense(l) => 2.0 * (l.rows() * l.cols() * t) as f64,
            Forward::Identity(n) => (n * t) as f64,
        }
    }
}

/// Immutable problem data and hyperparameters.
#[derive(Debug, Clone)]
pub struct Problem {
    forward: Forward,
    data: Arc<TemporalField>,
    mesh: Arc<MeshGraph>,
    pub lambda: f64,
    pub mu: f64,
    pub eta: f64,
}

impl Problem {
    pub fn new(
        leadfield: Arc<DenseMatrix>,
        data: TemporalField,
        mesh: Arc<MeshGraph>,
        lambda: f64,
        mu: f64,
        eta: f64,
    ) -> Result<Self, ModelError> {
        Self::with_forward(Forward::Dense(leadfield), data, mesh, lambda, mu, eta)
    }

    /// Denoising problem with `L = I`.
    pub fn denoising(
        data: TemporalField,
        mesh: Arc<MeshGraph>,
        lambda: f64,
        mu: f64,
        eta: f64,
    ) -> Result<Self, ModelError> {
        let n = mesh.num_nodes();
        Self::with_forward(Forward::Identity(n), data, mesh, lambda, mu, eta)
    }

    pub fn with_forward(
        forward: Forward,
        data: TemporalField,
        mesh: Arc<MeshGraph>,
        lambda: f64,
        mu: f64,
        eta: f64,
    ) -> Result<Self, ModelError> {
        if forward.cols() != mesh.num_nodes() {
            return Err(ModelError::Shape {
                what: "leadfield",
                expected: (forward.rows(), mesh.num_nodes()),
                got: (forward.rows(), forward.cols()),
            });
        }
        if data.rows() != forward.rows() || data.cols() == 0 {
            return Err(ModelError::Shape {
                what: "data",
                expected: (forward.rows(), data.cols().max(1)),
                got: data.shape(),
            });
        }
        if !data.is_finite() {
            return Err(ModelError::InvalidParameter("data contains non-finite values".into()));
        }
        let p = Self {
            forward,
            data: Arc::new(data),
            mesh,
            lambda,
            mu,
            eta,
        };
        p.check_params()?;
        Ok(p)
    }

    fn check_params(&self) -> Result<(), ModelError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("lambda = {}", self.lambda)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("mu = {}", self.mu)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("eta = {}", self.eta)));
        }
        Ok(())
    }

    /// Same operator and mesh with new data columns.
    pub fn with_data(&self, data: TemporalField) -> Result<Self, ModelError> {
        Self::with_forward(
            self.forward.clone(),
            data,
            self.mesh.clone(),
            self.lambda,
            self.mu,
            self.eta,
        )
    }

    /// Same data with new hyperparameters.
    pub fn with_params(&self, lambda: f64, mu: f64, eta: f64) -> Result<Self, ModelError> {
        let p = Self {
            lambda,
            mu,
            eta,
            ..self.clone()
        };
        p.check_params()?;
        Ok(p)
    }

    pub fn forward(&self) -> &Forward {
        &self.forward
    }

    pub fn data(&self) -> &TemporalField {
        &self.data
    }

    pub fn mesh(&self) -> &MeshGraph {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<MeshGraph> {
        &self.mesh
    }

    pub fn n(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn m(&self) -> usize {
        self.mesh.num_edges()
    }

    pub fn p(&self) -> usize {
        self.forward.rows()
    }

    pub fn t(&self) -> usize {
        self.data.cols()
    }

    /// Shrinkage threshold `mu / eta^2`.
    pub fn threshold(&self) -> f64 {
        self.mu / (self.eta * self.eta)
    }

    pub fn check_x(&self, x: &TemporalField) -> Result<(), ModelError> {
        check_shape("X", (self.n(), self.t()), x)
    }

    pub fn check_edge_field(&self, what: &'static str, y: &TemporalField) -> Result<(), ModelError> {
        check_shape(what, (self.m(), self.t()), y)
    }

    /// `D2 X` for a checked `X`.
    pub fn d2(&self, x: &TemporalField) -> TemporalField {
        let mut out = DenseMatrix::zeros(self.m(), x.cols());
        graphtv_apply_into(&self.mesh, x, &mut out);
        out
    }

    /// `L X - B`.
    pub fn residual(&self, x: &TemporalField) -> TemporalField {
        let mut r = self.forward.apply(x);
        r.axpy(-1.0, &self.data);
        r
    }
}

fn check_shape(what: &'static str, expected: (usize, usize), x: &TemporalField) -> Result<(), ModelError> {
    if x.shape() != expected {
        return Err(ModelError::Shape {
            what,
            expected,
            got: x.shape(),
        });
    }
    Ok(())
}

/// Primal `X`, auxiliary `Y` and scaled multipliers `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: TemporalField,
    pub y: TemporalField,
    pub c: TemporalField,
}

impl Iterate {
    pub fn zeros(prob: &Problem) -> Self {
        Self {
            x: DenseMatrix::zeros(prob.n(), prob.t()),
            y: DenseMatrix::zeros(prob.m(), prob.t()),
            c: DenseMatrix::zeros(prob.m(), prob.t()),
        }
    }

    pub fn check(&self, prob: &Problem) -> Result<(), ModelError> {
        prob.check_x(&self.x)?;
        prob.check_edge_field("Y", &self.y)?;
        prob.check_edge_field("C", &self.c)
    }
}

/// Soft thresholding `sign(v) max(|v| - kappa, 0)`; `|v| = kappa` maps to 0.
#[inline]
pub fn soft_threshold(v: f64, kappa: f64) -> f64 {
    if v.abs() <= kappa {
        0.0
    } else {
        v - kappa.copysign(v)
    }
}

/// `f(X)`.
pub fn objective(prob: &Problem, x: &TemporalField) -> Result<f64, ModelError> {
    prob.check_x(x)?;
    let r = prob.residual(x);
    let l2 = prob.lambda * prob.lambda;
    Ok(0.5 * r.norm_sq() + 0.5 * l2 * timediff_norm_sq(x) + prob.mu * prob.d2(x).norm_l1())
}

/// Augmented Lagrangian including the `-eta^2/2 ||C||^2` constant.
pub fn aug_lagrangian(prob: &Problem, it: &Iterate) -> Result<f64, ModelError> {
    it.check(prob)?;
    let e2 = prob.eta * prob.eta;
    Ok(smooth_aug_unchecked(prob, &it.x, &it.y, &it.c) + prob.mu * it.y.norm_l1()
        - 0.5 * e2 * it.c.norm_sq())
}

/// Smooth part `1/2 ||LX - B||^2 + lambda^2/2 ||X D1||^2 + eta^2/2 ||D2 X - Y + C||^2`.
pub fn smooth_aug(
    prob: &Problem,
    x: &TemporalField,
    y: &TemporalField,
    c: &TemporalField,
) -> Result<f64, ModelError> {
    prob.check_x(x)?;
    prob.check_edge_field("Y", y)?;
    prob.check_edge_field("C", c)?;
    Ok(smooth_aug_unchecked(prob, x, y, c))
}

fn smooth_aug_unchecked(prob: &Problem, x: &TemporalField, y: &TemporalField, c: &TemporalField) -> f64 {
    let l2 = prob.lambda * prob.lambda;
    let e2 = prob.eta * prob.eta;
    let mut pen = prob.d2(x);
    pen.axpy(-1.0, y);
    pen.axpy(1.0, c);
    0.5 * prob.residual(x).norm_sq() + 0.5 * l2 * timediff_norm_sq(x) + 0.5 * e2 * pen.norm_sq()
}

/// `Z(X, C) = shrink(D2 X + C, mu / eta^2)`.
pub fn shrink(prob: &Problem, x: &TemporalField, c: &TemporalField) -> Result<TemporalField, ModelError> {
    prob.check_x(x)?;
    prob.check_edge_field("C", c)?;
    let mut v = graphtv_apply(prob.mesh(), x)?;
    shrink_in_place(&mut v, c, prob.threshold());
    Ok(v)
}

/// `v <- shrink(v + c, kappa)`.
pub fn shrink_in_place(v: &mut TemporalField, c: &TemporalField, kappa: f64) {
    for (a, &b) in v.as_mut_slice().iter_mut().zip(c.as_slice()) {
        *a = soft_threshold(*a + b, kappa);
    }
}

/// `L^T (L X - B) + lambda^2 X D1 D1^T + eta^2 D2^T (D2 X - Y + C)`.
pub fn grad_x(prob: &Problem, it: &Iterate) -> Result<TemporalField, ModelError> {
    it.check(prob)?;
    let r = prob.residual(&it.x);
    let mut pen = prob.d2(&it.x);
    pen.axpy(-1.0, &it.y);
    pen.axpy(1.0, &it.c);
    let mut g = DenseMatrix::zeros(prob.n(), prob.t());
    prob.forward.adjoint_acc(1.0, &r, &mut g);
    timediff_gram_acc(prob.lambda * prob.lambda, &it.x, &mut g);
    graphtv_adjoint_acc(prob.mesh(), prob.eta * prob.eta, &pen, &mut g);
    Ok(g)
}

/// `(L^T L + eta^2 D2^T D2) S + lambda^2 S D1 D1^T`.
pub fn hessian_apply(prob: &Problem, s: &TemporalField) -> Result<TemporalField, ModelError> {
    prob.check_x(s)?;
    let ls = prob.forward.apply(s);
    let ds = prob.d2(s);
    let mut h = DenseMatrix::zeros(prob.n(), prob.t());
    prob.forward.adjoint_acc(1.0, &ls, &mut h);
    timediff_gram_acc(prob.lambda * prob.lambda, s, &mut h);
    graphtv_adjoint_acc(prob.mesh(), prob.eta * prob.eta, &ds, &mut h);
    Ok(h)
}

/// Projected objective: the augmented Lagrangian at `Y = shrink(X, C)`
/// without the constant `-eta^2/2 ||C||^2`.
pub fn f_proj(prob: &Problem, x: &TemporalField, c: &TemporalField) -> Result<f64, ModelError> {
    let y = shrink(prob, x, c)?;
    Ok(smooth_aug_unchecked(prob, x, &y, c) + prob.mu * y.norm_l1())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Problem {
        let mesh = Arc::new(MeshGraph::path(3));
        let l = Arc::new(DenseMatrix::from_rows(&[[1.0, 0.5, 0.0], [0.0, 1.0, -1.0]]));
        let b = DenseMatrix::from_rows(&[[1.0, 2.0], [0.5, -1.0]]);
        Problem::new(l, b, mesh, 0.3, 0.2, 2.0).unwrap()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(1.0, 1.0), 0.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(0.7, 0.0), 0.7);
    }

    #[test]
    fn zero_problem_has_zero_objective() {
        let p = small();
        let p0 = p.with_data(DenseMatrix::zeros(2, 2)).unwrap();
        let it = Iterate::zeros(&p0);
        assert_eq!(objective(&p0, &it.x).unwrap(), 0.0);
        assert_eq!(aug_lagrangian(&p0, &it).unwrap(), 0.0);
    }

    #[test]
    fn objective_is_split_lagrangian_at_consistent_point() {
        let p = small();
        let x = DenseMatrix::from_rows(&[[0.2, -1.0], [1.5, 0.3], [-0.7, 0.9]]);
        let y = graphtv_apply(p.mesh(), &x).unwrap();
        let it = Iterate {
            x: x.clone(),
            c: DenseMatrix::zeros(2, 2),
            y,
        };
        let a = objective(&p, &x).unwrap();
        let b = aug_lagrangian(&p, &it).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn zero_mu_shrink_is_identity_shift() {
        let p = small().with_params(0.3, 0.0, 2.0).unwrap();
        let x = DenseMatrix::from_rows(&[[0.2, -1.0], [1.5, 0.3], [-0.7, 0.9]]);
        let c = DenseMatrix::from_rows(&[[0.1, 0.2], [0.3, -0.4]]);
        let z = shrink(&p, &x, &c).unwrap();
        assert_eq!(z, graphtv_apply(p.mesh(), &x).unwrap().add(&c));
    }

    #[test]
    fn shape_errors() {
        let p = small();
        assert!(objective(&p, &DenseMatrix::zeros(2, 2)).is_err());
        assert!(p.with_params(-1.0, 0.0, 1.0).is_err());
        assert!(p.with_params(0.0, 0.0, 0.0).is_err());
        let bad = Problem::new(
            Arc::new(DenseMatrix::zeros(2, 4)),
            DenseMatrix::zeros(2, 1),
            Arc::new(MeshGraph::path(3)),
            0.0,
            0.0,
            1.0,
        );
        assert!(matches!(bad, Err(ModelError::Shape { .. })));
    }
}
