//! Variable projected augmented Lagrangian: a few nonlinear conjugate
//! gradient steps on the projected objective per multiplier update.

use std::time::Instant;

use crate::graph::{graphtv_adjoint_acc, graphtv_apply_into, timediff_gram_acc};
use crate::linalg::{dot, DenseMatrix, TemporalField};
use crate::model::{shrink_in_place, Iterate, Problem};

use super::line::{timediff_inner, LineModel};
use super::{
    rel_change, BacktrackRecord, BetaMode, Monitor, SolveReport, SolverConfig, SolverError,
    StepError, StepMode,
};

const REFRESH_EVERY: usize = 100;

/// Conjugate-gradient momentum from consecutive gradients.
///
/// FR: `|g+|^2 / |g|^2`. PR: `<g+, g+ - g> / |g|^2`. Hybrid: PR clamped
/// into `[-FR, FR]`.
pub fn compute_beta(mode: BetaMode, g_new: &[f64], g_old: &[f64]) -> Result<f64, StepError> {
    let old = dot(g_old, g_old);
    if !(old > 0.0) {
        return Err(StepError::ZeroGradient);
    }
    let new = dot(g_new, g_new);
    let fr = new / old;
    let pr = (new - dot(g_new, g_old)) / old;
    Ok(match mode {
        BetaMode::FletcherReeves => fr,
        BetaMode::PolakRibiere => pr,
        BetaMode::Hybrid => {
            if pr < -fr {
                -fr
            } else if pr > fr {
                fr
            } else {
                pr
            }
        }
    })
}

/// State seen by an observer after every accepted inner step.
#[derive(Debug)]
pub struct InnerView<'a> {
    pub outer: usize,
    pub inner: usize,
    pub alpha: f64,
    pub x: &'a TemporalField,
    pub y: &'a TemporalField,
    pub c: &'a TemporalField,
}

pub fn vpal_solve(prob: &Problem, cfg: &SolverConfig) -> Result<SolveReport, SolverError> {
    vpal_solve_from(prob, cfg, None, None)
}

/// VPAL from an initial `X` and multiplier `C` (zeros when `None`).
pub fn vpal_solve_from(
    prob: &Problem,
    cfg: &SolverConfig,
    x0: Option<&TemporalField>,
    c0: Option<&TemporalField>,
) -> Result<SolveReport, SolverError> {
    vpal_solve_observed(prob, cfg, x0, c0, &mut |_| {})
}

pub fn vpal_solve_observed(
    prob: &Problem,
    cfg: &SolverConfig,
    x0: Option<&TemporalField>,
    c0: Option<&TemporalField>,
    observer: &mut dyn FnMut(&InnerView<'_>),
) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    let start = Instant::now();
    let (n, m, t) = (prob.n(), prob.m(), prob.t());
    let x = match x0 {
        Some(x) => {
            prob.check_x(x)?;
            x.clone()
        }
        None => DenseMatrix::zeros(n, t),
    };
    let c = match c0 {
        Some(c) => {
            prob.check_edge_field("C", c)?;
            c.clone()
        }
        None => DenseMatrix::zeros(m, t),
    };
    let mut s = State::new(prob, x, c);
    let f0 = s.objective(prob);
    let setup_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut report = SolveReport::new("vpal", DenseMatrix::zeros(0, 0));
    let mut mon = Monitor::new(cfg, prob, start, f0)?;
    let big_op = prob.forward().apply_flops(t);
    let small_op = ((n + m) * t) as f64;
    let l2 = prob.lambda * prob.lambda;
    let e2 = prob.eta * prob.eta;
    let mut x_prev = s.x.clone();
    let mut g_new = DenseMatrix::zeros(n, t);
    // Per-iteration scratch.
    let mut p = DenseMatrix::zeros(n, t);
    let mut lp = DenseMatrix::zeros(prob.p(), t);
    let mut d2p = DenseMatrix::zeros(m, t);
    let mut v0 = DenseMatrix::zeros(m, t);
    let mut pen = DenseMatrix::zeros(m, t);
    let mut prev_alpha = f64::NAN;
    let mut j_global = 0usize;

    for k in 1.. {
        x_prev.as_mut_slice().copy_from_slice(s.x.as_slice());
        s.project(prob);
        let mut g = std::mem::take(&mut s.g);
        s.gradient_into(prob, &mut g, &mut pen);
        s.g = g;
        report.counters.adjoint += 1;
        report.counters.graph += 2;
        p.as_mut_slice().copy_from_slice(s.g.as_slice());
        let h_outer_start = s.h(prob, l2, e2);
        let mut slack_sum = 0.0;

        for i in 0..cfg.inner_iters {
            if s.g.norm_sq() == 0.0 {
                break;
            }
            prob.forward().apply_into(&p, &mut lp);
            graphtv_apply_into(prob.mesh(), &p, &mut d2p);
            report.counters.forward += 1;
            report.counters.graph += 1;
            report.counters.flops += big_op + 12.0 * small_op;
            let line = LineModel::new(prob, &s.x, &p, &s.r, &lp, &s.d2x, &d2p, &s.y, &s.c, &mut v0);

            let eps = cfg.backtracking.slack(j_global);
            let h_before = if cfg.step_mode == StepMode::Backtracking {
                s.h(prob, l2, e2)
            } else {
                0.0
            };
            let alpha = match cfg.step_mode {
                StepMode::Linearized => match line.linearized() {
                    Ok(a) if a > 0.0 && a.is_finite() => Some(a),
                    _ => {
                        report.fallbacks += 1;
                        line.optimal_1d(prev_alpha).ok()
                    }
                },
                StepMode::Optimal1d => {
                    let init = line
                        .linearized()
                        .ok()
                        .filter(|a| *a > 0.0 && a.is_finite())
                        .unwrap_or(prev_alpha);
                    match line.optimal_1d(init) {
                        Ok(a) => Some(a),
                        Err(_) => {
                            report.fallbacks += 1;
                            line.linearized().ok().filter(|a| *a > 0.0 && a.is_finite())
                        }
                    }
                }
                StepMode::Backtracking => line.backtracking(eps, &cfg.backtracking).ok(),
            };
            let Some(alpha) = alpha.filter(|a| *a > 0.0) else {
                break;
            };
            prev_alpha = alpha;

            s.x.axpy(-alpha, &p);
            s.r.axpy(-alpha, &lp);
            graphtv_apply_into(prob.mesh(), &s.x, &mut s.d2x);
            s.project(prob);
            report.counters.graph += 1;
            report.counters.flops += 8.0 * small_op;

            if cfg.step_mode == StepMode::Backtracking {
                slack_sum += eps;
                report.backtracking.push(BacktrackRecord {
                    outer: k,
                    j: j_global,
                    alpha,
                    eps,
                    h_before,
                    h_after: s.h(prob, l2, e2),
                    h_outer_start,
                    slack_sum,
                });
            }
            j_global += 1;
            observer(&InnerView {
                outer: k,
                inner: i,
                alpha,
                x: &s.x,
                y: &s.y,
                c: &s.c,
            });

            if i + 1 < cfg.inner_iters {
                s.gradient_into(prob, &mut g_new, &mut pen);
                report.counters.adjoint += 1;
                report.counters.graph += 1;
                report.counters.flops += big_op + 10.0 * small_op;
                let beta = compute_beta(cfg.beta_mode, g_new.as_slice(), s.g.as_slice())?;
                p.scale_mut(beta);
                p.axpy(1.0, &g_new);
                // Keep -p a descent direction.
                if p.dot(&g_new) <= 0.0 {
                    p.as_mut_slice().copy_from_slice(g_new.as_slice());
                }
                std::mem::swap(&mut s.g, &mut g_new);
            }
        }

        // C <- C + (D2 X - Y)
        for ((ci, &di), &yi) in s
            .c
            .as_mut_slice()
            .iter_mut()
            .zip(s.d2x.as_slice())
            .zip(s.y.as_slice())
        {
            *ci += di - yi;
        }
        if k % REFRESH_EVERY == 0 {
            s.r = prob.residual(&s.x);
            report.counters.forward += 1;
        }

        let f = if s.x.is_finite() {
            s.objective(prob)
        } else {
            f64::NAN
        };
        if let Some(term) = mon.record(k, f, rel_change(&s.x, &x_prev), prob, &s.x) {
            report.termination = term;
            break;
        }
    }

    mon.finish(&mut report, cfg.record_history, setup_ms);
    report.x = s.x.clone();
    report.state = Some(Iterate {
        x: s.x,
        y: s.y,
        c: s.c,
    });
    Ok(report)
}

/// Iterate plus cached products.
struct State {
    x: TemporalField,
    y: TemporalField,
    c: TemporalField,
    /// `L X - B`, updated along each step and refreshed periodically.
    r: TemporalField,
    d2x: TemporalField,
    g: TemporalField,
}

impl State {
    fn new(prob: &Problem, x: TemporalField, c: TemporalField) -> Self {
        let r = prob.residual(&x);
        let d2x = prob.d2(&x);
        let mut y = d2x.clone();
        shrink_in_place(&mut y, &c, prob.threshold());
        let g = DenseMatrix::zeros(x.rows(), x.cols());
        Self {
            x,
            y,
            c,
            r,
            d2x,
            g,
        }
    }

    /// `Y <- shrink(D2 X + C)`.
    fn project(&mut self, prob: &Problem) {
        self.y.as_mut_slice().copy_from_slice(self.d2x.as_slice());
        shrink_in_place(&mut self.y, &self.c, prob.threshold());
    }

    /// Gradient at the cached state.
    fn gradient_into(&self, prob: &Problem, target: &mut TemporalField, pen: &mut TemporalField) {
        target.fill(0.0);
        prob.forward().adjoint_acc(1.0, &self.r, target);
        timediff_gram_acc(prob.lambda * prob.lambda, &self.x, target);
        pen.as_mut_slice().copy_from_slice(self.d2x.as_slice());
        pen.axpy(-1.0, &self.y);
        pen.axpy(1.0, &self.c);
        graphtv_adjoint_acc(prob.mesh(), prob.eta * prob.eta, pen, target);
    }

    /// Split objective at `(X, Y, C)` without the constant multiplier term.
    fn h(&self, prob: &Problem, l2: f64, e2: f64) -> f64 {
        let mut pen = self.d2x.clone();
        pen.axpy(-1.0, &self.y);
        pen.axpy(1.0, &self.c);
        0.5 * self.r.norm_sq()
            + 0.5 * l2 * timediff_inner(&self.x, &self.x)
            + 0.5 * e2 * pen.norm_sq()
            + prob.mu * self.y.norm_l1()
    }

    fn objective(&self, prob: &Problem) -> f64 {
        let l2 = prob.lambda * prob.lambda;
        0.5 * self.r.norm_sq() + 0.5 * l2 * timediff_inner(&self.x, &self.x) + prob.mu * self.d2x.norm_l1()
    }
}
