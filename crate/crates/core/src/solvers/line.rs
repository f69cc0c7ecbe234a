//! Step-size rules along a direction `S` with update `X - alpha S`.
//!
//! Everything is reduced to scalars and two edge fields once per direction,
//! so each trial step costs `O(mT)` at most.

use crate::graph::graphtv_apply_into;
use crate::linalg::{DenseMatrix, TemporalField};
use crate::model::{Iterate, Problem};

use super::{BacktrackingParams, SolverError, StepError};

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const MAX_EXPANSIONS: usize = 60;
const OPT_TOL: f64 = 1e-8;

/// `<X D1, S D1>`.
pub(crate) fn timediff_inner(a: &TemporalField, b: &TemporalField) -> f64 {
    let t = a.cols();
    if t < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..a.rows() {
        let (ra, rb) = (a.row(i), b.row(i));
        for j in 0..t - 1 {
            s += (ra[j] - ra[j + 1]) * (rb[j] - rb[j + 1]);
        }
    }
    s
}

/// Restriction of the split objective to the line `X - alpha S`.
pub(crate) struct LineModel<'a> {
    // 1/2 ||r - a LS||^2 + lambda^2/2 ||(X - a S) D1||^2 = q0 - a q1 + a^2 q2 / 2
    q0: f64,
    q1: f64,
    q2: f64,
    e2: f64,
    mu: f64,
    kappa: f64,
    /// `D2 X + C`.
    v0: &'a TemporalField,
    d2s: &'a TemporalField,
    // eta^2/2 ||pen0 - a D2S||^2 with pen0 = D2 X - Y + C
    p0: f64,
    p1: f64,
    p2: f64,
    s_norm_sq: f64,
}

impl<'a> LineModel<'a> {
    /// `r = L X - B`, `ls = L S`, `d2x = D2 X`, `d2s = D2 S`; `v0` is scratch
    /// of the edge-field shape.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        prob: &Problem,
        x: &TemporalField,
        s: &TemporalField,
        r: &TemporalField,
        ls: &TemporalField,
        d2x: &TemporalField,
        d2s: &'a TemporalField,
        y: &TemporalField,
        c: &TemporalField,
        v0: &'a mut TemporalField,
    ) -> Self {
        let l2 = prob.lambda * prob.lambda;
        let e2 = prob.eta * prob.eta;
        let q0 = 0.5 * r.norm_sq() + 0.5 * l2 * timediff_inner(x, x);
        let q1 = r.dot(ls) + l2 * timediff_inner(x, s);
        let q2 = ls.norm_sq() + l2 * timediff_inner(s, s);
        let (mut p0, mut p1) = (0.0, 0.0);
        for ((((v, &dx), &ci), &yi), &ds) in v0
            .as_mut_slice()
            .iter_mut()
            .zip(d2x.as_slice())
            .zip(c.as_slice())
            .zip(y.as_slice())
            .zip(d2s.as_slice())
        {
            *v = dx + ci;
            let pen = *v - yi;
            p0 += pen * pen;
            p1 += pen * ds;
        }
        Self {
            q0,
            q1,
            q2,
            e2,
            mu: prob.mu,
            kappa: prob.threshold(),
            p0,
            p1,
            p2: d2s.norm_sq(),
            v0,
            d2s,
            s_norm_sq: s.norm_sq(),
        }
    }

    /// Closed-form minimizer with `Y` frozen.
    pub(crate) fn linearized(&self) -> Result<f64, StepError> {
        if self.s_norm_sq == 0.0 {
            return Err(StepError::ZeroDirection);
        }
        let num = self.q1 + self.e2 * self.p1;
        let den = self.q2 + self.e2 * self.p2;
        if !(den > 1e-300) {
            return Err(StepError::Degenerate(den));
        }
        Ok(num / den)
    }

    /// Smooth split objective with `Y` frozen.
    pub(crate) fn phi(&self, a: f64) -> f64 {
        self.q0 - a * self.q1
            + 0.5 * a * a * self.q2
            + 0.5 * self.e2 * (self.p0 - 2.0 * a * self.p1 + a * a * self.p2)
    }

    /// Projected objective (without the constant multiplier term).
    pub(crate) fn f_proj(&self, a: f64) -> f64 {
        let (kappa, half_e2, mu) = (self.kappa, 0.5 * self.e2, self.mu);
        let mut edge = 0.0;
        for (&v0, &ds) in self.v0.as_slice().iter().zip(self.d2s.as_slice()) {
            let v = v0 - a * ds;
            let av = v.abs();
            // Moreau envelope of mu |.| with parameter 1/eta^2.
            edge += if av <= kappa {
                half_e2 * v * v
            } else {
                mu * av - 0.5 * mu * kappa
            };
        }
        self.q0 - a * self.q1 + 0.5 * a * a * self.q2 + edge
    }

    /// Golden-section minimization of `f_proj` on `[0, 2h]`, where `h` is
    /// grown from `init` until `f_proj(2h) >= f_proj(h)`.
    pub(crate) fn optimal_1d(&self, init: f64) -> Result<f64, StepError> {
        if self.s_norm_sq == 0.0 {
            return Err(StepError::ZeroDirection);
        }
        let mut h = if init.is_finite() && init > 0.0 { init } else { 1.0 };
        let mut fh = self.f_proj(h);
        let mut expansions = 0;
        loop {
            let f2 = self.f_proj(2.0 * h);
            if !(f2 < fh) {
                break;
            }
            h *= 2.0;
            fh = f2;
            expansions += 1;
            if expansions > MAX_EXPANSIONS || !h.is_finite() {
                return Err(StepError::Bracket(expansions));
            }
        }
        let (mut a, mut b) = (0.0, 2.0 * h);
        let mut x1 = b - GOLDEN * (b - a);
        let mut x2 = a + GOLDEN * (b - a);
        let mut f1 = self.f_proj(x1);
        let mut f2 = self.f_proj(x2);
        let width_tol = OPT_TOL * h;
        while b - a > width_tol {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - GOLDEN * (b - a);
                f1 = self.f_proj(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + GOLDEN * (b - a);
                f2 = self.f_proj(x2);
            }
        }
        let mid = 0.5 * (a + b);
        // The bracket endpoint 0 is never evaluated inside the loop.
        if self.f_proj(mid) > self.f_proj(0.0) {
            return Ok(0.0);
        }
        Ok(mid)
    }

    /// Largest `rho^k` satisfying the Armijo-with-slack test on `phi`.
    pub(crate) fn backtracking(&self, eps: f64, params: &BacktrackingParams) -> Result<f64, StepError> {
        if self.s_norm_sq == 0.0 {
            return Err(StepError::ZeroDirection);
        }
        let phi0 = self.phi(0.0);
        let mut a = 1.0;
        loop {
            if self.phi(a) <= phi0 - params.delta * a * a * self.s_norm_sq + eps {
                return Ok(a);
            }
            a *= params.rho;
            if a < 1e-16 {
                return Err(StepError::Underflow(a));
            }
        }
    }
}

fn with_model<R>(
    prob: &Problem,
    it: &Iterate,
    s: &TemporalField,
    f: impl FnOnce(&LineModel<'_>) -> R,
) -> Result<R, SolverError> {
    it.check(prob)?;
    prob.check_x(s)?;
    let r = prob.residual(&it.x);
    let ls = prob.forward().apply(s);
    let d2x = prob.d2(&it.x);
    let mut d2s = DenseMatrix::zeros(prob.m(), prob.t());
    graphtv_apply_into(prob.mesh(), s, &mut d2s);
    let mut v0 = DenseMatrix::zeros(prob.m(), prob.t());
    let model = LineModel::new(prob, &it.x, s, &r, &ls, &d2x, &d2s, &it.y, &it.c, &mut v0);
    Ok(f(&model))
}

/// Exact minimizer of the split objective along `X - alpha S` with `Y` frozen:
/// `alpha = <S, G> / <S, H S>`.
pub fn step_linearized(
    prob: &Problem,
    it: &Iterate,
    s: &TemporalField,
) -> Result<f64, SolverError> {
    Ok(with_model(prob, it, s, |m| m.linearized())??)
}

/// Minimizer of `f_proj(X - alpha S)` with `C` fixed. `init` seeds the bracket
/// (the linearized step or the previous accepted step).
pub fn step_optimal_1d(
    prob: &Problem,
    it: &Iterate,
    s: &TemporalField,
    init: f64,
) -> Result<f64, SolverError> {
    Ok(with_model(prob, it, s, |m| m.optimal_1d(init))??)
}

/// Backtracking step for inner step number `j` (slack `eps0 * decay^j`).
pub fn step_backtracking(
    prob: &Problem,
    it: &Iterate,
    s: &TemporalField,
    j: usize,
    params: &BacktrackingParams,
) -> Result<f64, SolverError> {
    Ok(with_model(prob, it, s, |m| m.backtracking(params.slack(j), params))??)
}
