//! Accelerated proximal gradient with an iterative graph-TV prox.

use std::time::Instant;

use crate::graph::{timediff_gram_acc, timediff_norm_sq};
use crate::linalg::{DenseMatrix, TemporalField};
use crate::model::Problem;

use super::vpal::vpal_solve_from;
use super::{rel_change, Monitor, SolveReport, SolverConfig, SolverError, Termination};

/// `L^T (L X) + lambda^2 X D1 D1^T`.
fn smooth_hessian(prob: &Problem, x: &TemporalField) -> TemporalField {
    let lx = prob.forward().apply(x);
    let mut out = DenseMatrix::zeros(x.rows(), x.cols());
    prob.forward().adjoint_acc(1.0, &lx, &mut out);
    timediff_gram_acc(prob.lambda * prob.lambda, x, &mut out);
    out
}

/// Largest eigenvalue of the smooth-part Hessian by power iteration,
/// inflated by 1% so `1 / L` is a safe step.
pub fn estimate_lipschitz(prob: &Problem, iters: usize) -> f64 {
    let (n, t) = (prob.n(), prob.t());
    let mut v = DenseMatrix::from_fn(n, t, |i, j| 1.0 + ((i * 7 + j * 13) % 11) as f64 / 11.0);
    v.scale_mut(1.0 / v.norm());
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let hv = smooth_hessian(prob, &v);
        est = v.dot(&hv);
        let norm = hv.norm();
        if norm == 0.0 {
            return f64::MIN_POSITIVE;
        }
        v = hv;
        v.scale_mut(1.0 / norm);
    }
    1.01 * est
}

fn objective_of(prob: &Problem, x: &TemporalField) -> f64 {
    let l2 = prob.lambda * prob.lambda;
    0.5 * prob.residual(x).norm_sq() + 0.5 * l2 * timediff_norm_sq(x) + prob.mu * prob.d2(x).norm_l1()
}

/// FISTA with step `1 / cfg.lipschitz`. The prox
/// `argmin_Z 1/2 ||Z - V||^2 + (mu / L) ||D2 Z||_1` is solved by a warm-started
/// VPAL run on the denoising problem (`prox_tol`, `prox_max_iter`).
pub fn fista_solve(prob: &Problem, cfg: &SolverConfig) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    let start = Instant::now();
    let (n, t) = (prob.n(), prob.t());
    let lip = cfg.lipschitz;
    let prox_cfg = SolverConfig {
        tol: cfg.prox_tol,
        max_iter: cfg.prox_max_iter,
        record_history: false,
        time_limit: None,
        track: None,
        ..cfg.clone()
    };
    let mut ltb = DenseMatrix::zeros(n, t);
    prob.forward().adjoint_acc(1.0, prob.data(), &mut ltb);

    let mut report = SolveReport::new("fista", DenseMatrix::zeros(0, 0));
    let mut x = DenseMatrix::zeros(n, t);
    let mut z = x.clone();
    let mut tk = 1.0f64;
    let mut prox_state: Option<TemporalField> = None;
    let setup_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut mon = Monitor::new(cfg, prob, start, objective_of(prob, &x))?;

    for k in 1.. {
        // V = Z - (L^T L Z + lambda^2 Z M - L^T B) / L
        let mut v = smooth_hessian(prob, &z);
        v.axpy(-1.0, &ltb);
        v.scale_mut(-1.0 / lip);
        v.axpy(1.0, &z);
        report.counters.forward += 1;
        report.counters.adjoint += 1;
        report.counters.flops += 2.0 * prob.forward().apply_flops(t);

        let x_new = if prob.mu == 0.0 {
            v
        } else {
            let sub = Problem::denoising(v, prob.mesh_arc().clone(), 0.0, prob.mu / lip, prob.eta)?;
            let rep = vpal_solve_from(&sub, &prox_cfg, Some(&x), prox_state.as_ref())?;
            report.inner_iterations += rep.iterations;
            report.counters.graph += rep.counters.graph;
            report.counters.flops += rep.counters.flops;
            if rep.termination == Termination::Diverged {
                log::warn!("fista: prox subproblem diverged at iteration {k}");
            }
            prox_state = rep.state.map(|s| s.c);
            rep.x
        };

        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        let mut diff = x_new.clone();
        diff.axpy(-1.0, &x);
        z = x_new.clone();
        z.axpy((tk - 1.0) / t_new, &diff);
        let rel = rel_change(&x_new, &x);
        x = x_new;
        tk = t_new;

        let f = if x.is_finite() { objective_of(prob, &x) } else { f64::NAN };
        if let Some(term) = mon.record(k, f, rel, prob, &x) {
            report.termination = term;
            break;
        }
    }

    mon.finish(&mut report, cfg.record_history, setup_ms);
    report.x = x;
    Ok(report)
}
