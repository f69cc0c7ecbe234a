//! Minimum-norm (Tikhonov) inversion with sLORETA standardization.

use crate::linalg::{Cholesky, DenseMatrix, LinalgError, TemporalField};
use crate::model::{Forward, Problem};

use super::SolverError;

fn leadfield(prob: &Problem) -> DenseMatrix {
    match prob.forward() {
        Forward::Dense(l) => (**l).clone(),
        Forward::Identity(n) => DenseMatrix::identity(*n),
    }
}

fn factor_gram(l: &DenseMatrix, reg: f64) -> Result<Cholesky, SolverError> {
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(SolverError::InvalidConfig(format!(
            "regularization must be positive, got {reg}"
        )));
    }
    let g = l.matmul_t(l)?;
    Cholesky::factor_shifted(&g, reg).map_err(|e| match e {
        LinalgError::NotPositiveDefinite { .. } => SolverError::IllPosed(e.to_string()),
        other => other.into(),
    })
}

/// `L^T (L L^T + reg I)^{-1} B`.
pub fn min_norm_solve(
    l: &DenseMatrix,
    b: &TemporalField,
    reg: f64,
) -> Result<TemporalField, SolverError> {
    let chol = factor_gram(l, reg)?;
    let w = chol.solve_matrix(b)?;
    Ok(l.t_matmul(&w)?)
}

/// Minimum-norm estimate with each source row divided by the square root of
/// the matching diagonal entry of `R = L^T (L L^T + reg I)^{-1} L`.
pub fn sloreta_solve(prob: &Problem, reg: f64) -> Result<TemporalField, SolverError> {
    let l = leadfield(prob);
    let chol = factor_gram(&l, reg)?;
    let w = chol.solve_matrix(prob.data())?;
    let mut x = l.t_matmul(&w)?;
    let gl = chol.solve_matrix(&l)?;
    for j in 0..l.cols() {
        let r: f64 = (0..l.rows()).map(|i| l[(i, j)] * gl[(i, j)]).sum();
        let scale = if r > 0.0 { 1.0 / r.sqrt() } else { 0.0 };
        x.row_mut(j).iter_mut().for_each(|v| *v *= scale);
    }
    Ok(x)
}

/// `1e-2 * trace(L L^T) / p`, a noise-agnostic default.
pub fn default_sloreta_reg(prob: &Problem) -> f64 {
    let l = leadfield(prob);
    let tr = l.norm_sq();
    1e-2 * tr / l.rows() as f64
}

/// sLORETA with the candidate regularization giving the smallest relative
/// error against `truth`, as used for best-case baseline comparisons.
pub fn sloreta_best_reg(
    prob: &Problem,
    truth: &TemporalField,
    candidates: &[f64],
) -> Result<(f64, TemporalField), SolverError> {
    let den = truth.norm();
    let mut best: Option<(f64, f64, TemporalField)> = None;
    for &reg in candidates {
        let x = sloreta_solve(prob, reg)?;
        let err = x.dist(truth) / den;
        if best.as_ref().is_none_or(|b| err < b.0) {
            best = Some((err, reg, x));
        }
    }
    best.map(|(_, reg, x)| (reg, x))
        .ok_or_else(|| SolverError::InvalidConfig("no regularization candidates".into()))
}
