//! ADMM with an exact Sylvester x-update.

use std::time::Instant;

use crate::graph::{graphtv_adjoint_acc, timediff_norm_sq};
use crate::linalg::{timediff_gram_matrix, DenseMatrix, LinalgError, SylvesterSolver};
use crate::model::{shrink_in_place, Iterate, Problem};

use super::{rel_change, Monitor, SolveReport, SolverConfig, SolverError};

/// Resource estimate for the dense x-update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmEstimate {
    pub factorizations: usize,
    pub bytes: u64,
    pub setup_flops: f64,
    pub iter_flops: f64,
}

pub fn admm_estimate(prob: &Problem) -> AdmmEstimate {
    let (n, p, t) = (prob.n() as f64, prob.p() as f64, prob.t());
    // Eigenvalues of D1 D1^T are distinct, so every time shift needs its own factor.
    let factorizations = if prob.lambda > 0.0 { t } else { 1 };
    let bytes = 8.0 * n * n * (1.0 + factorizations as f64) + 8.0 * n * t as f64 * 6.0;
    AdmmEstimate {
        factorizations,
        bytes: bytes.min(u64::MAX as f64) as u64,
        setup_flops: p * n * n + factorizations as f64 * n * n * n / 3.0,
        iter_flops: 2.0 * n * n * t as f64 + 4.0 * n * (t * t) as f64 + 2.0 * p * n * t as f64,
    }
}

fn preflight(prob: &Problem, cfg: &SolverConfig) -> Result<(), SolverError> {
    let est = admm_estimate(prob);
    if est.bytes > cfg.admm_memory_limit {
        return Err(SolverError::Intractable {
            reason: format!(
                "dense x-update for n = {} needs about {:.1} GiB (limit {:.1} GiB)",
                prob.n(),
                est.bytes as f64 / (1u64 << 30) as f64,
                cfg.admm_memory_limit as f64 / (1u64 << 30) as f64
            ),
        });
    }
    if let Some(limit) = cfg.time_limit {
        let secs = est.setup_flops / cfg.admm_flop_rate;
        if secs > limit.as_secs_f64() {
            return Err(SolverError::Intractable {
                reason: format!(
                    "factorization alone needs about {:.0} s at {:.1e} flop/s (limit {:?})",
                    secs,
                    cfg.admm_flop_rate,
                    limit
                ),
            });
        }
    }
    Ok(())
}

pub fn admm_solve(prob: &Problem, cfg: &SolverConfig) -> Result<SolveReport, SolverError> {
    admm_solve_from(prob, cfg, None)
}

/// ADMM started from `(Y, C)` of `init` (zeros when `None`).
pub fn admm_solve_from(
    prob: &Problem,
    cfg: &SolverConfig,
    init: Option<&Iterate>,
) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    preflight(prob, cfg)?;
    let start = Instant::now();
    let (n, m, t) = (prob.n(), prob.m(), prob.t());
    let e2 = prob.eta * prob.eta;
    let l2 = prob.lambda * prob.lambda;

    let mut it = match init {
        Some(it) => {
            it.check(prob)?;
            it.clone()
        }
        None => Iterate::zeros(prob),
    };

    let mut hth = prob.forward().gram();
    for (u, v, w) in prob.mesh().edges() {
        let s = e2 * w * w;
        hth[(u, u)] += s;
        hth[(v, v)] += s;
        hth[(u, v)] -= s;
        hth[(v, u)] -= s;
    }
    let solver = SylvesterSolver::new(&hth, &timediff_gram_matrix(t), l2).map_err(|e| match e {
        LinalgError::NotPositiveDefinite { .. } => SolverError::IllPosed(format!(
            "L^T L + eta^2 D2^T D2 is not positive definite ({e})"
        )),
        other => other.into(),
    })?;
    drop(hth);
    let mut ltb = DenseMatrix::zeros(n, t);
    prob.forward().adjoint_acc(1.0, prob.data(), &mut ltb);

    let mut report = SolveReport::new("admm", DenseMatrix::zeros(0, 0));
    report.counters.flops += admm_estimate(prob).setup_flops;
    report.counters.adjoint += 1;
    let setup_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Some(limit) = cfg.time_limit {
        if start.elapsed() > limit {
            return Err(SolverError::Intractable {
                reason: format!("setup exceeded the time limit of {limit:?}"),
            });
        }
    }

    let f0 = objective_of(prob, &it.x);
    let mut mon = Monitor::new(cfg, prob, start, f0)?;
    let mut rhs = DenseMatrix::zeros(n, t);
    let mut diff = DenseMatrix::zeros(m, t);
    let small = ((n + m) * t) as f64;

    for k in 1.. {
        rhs.as_mut_slice().copy_from_slice(ltb.as_slice());
        for ((d, &y), &c) in diff
            .as_mut_slice()
            .iter_mut()
            .zip(it.y.as_slice())
            .zip(it.c.as_slice())
        {
            *d = y - c;
        }
        graphtv_adjoint_acc(prob.mesh(), e2, &diff, &mut rhs);
        let x_new = solver.solve(&rhs)?;
        let d2x = prob.d2(&x_new);
        it.y.as_mut_slice().copy_from_slice(d2x.as_slice());
        shrink_in_place(&mut it.y, &it.c, prob.threshold());
        for ((c, &d), &y) in it
            .c
            .as_mut_slice()
            .iter_mut()
            .zip(d2x.as_slice())
            .zip(it.y.as_slice())
        {
            *c += d - y;
        }
        let rel = rel_change(&x_new, &it.x);
        it.x = x_new;
        report.counters.linear_solves += 1;
        report.counters.forward += 1;
        report.counters.graph += 2;
        report.counters.flops += solver.solve_flops() + prob.forward().apply_flops(t) + 10.0 * small;

        let f = if it.x.is_finite() {
            objective_of(prob, &it.x)
        } else {
            f64::NAN
        };
        if let Some(term) = mon.record(k, f, rel, prob, &it.x) {
            report.termination = term;
            break;
        }
    }

    mon.finish(&mut report, cfg.record_history, setup_ms);
    report.x = it.x.clone();
    report.state = Some(it);
    Ok(report)
}

fn objective_of(prob: &Problem, x: &DenseMatrix) -> f64 {
    let l2 = prob.lambda * prob.lambda;
    0.5 * prob.residual(x).norm_sq() + 0.5 * l2 * timediff_norm_sq(x) + prob.mu * prob.d2(x).norm_l1()
}
