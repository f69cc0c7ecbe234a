//! One timed solver run on a problem.

use std::sync::Arc;
use std::time::Instant;

use vpal::linalg::TemporalField;
use vpal::metrics::{psnr, rel_error, sed, sparsity_ratio, ssim, MetricReport};
use vpal::model::Problem;
use vpal::sim::Dataset;
use vpal::solvers::{
    admm_solve, default_sloreta_reg, fista_solve, sloreta_best_reg, sloreta_solve, vpal_solve,
    SolveReport, SolverConfig, Termination,
};
use vpal::windowed::{make_windows, vpal_windowed_solve};

use crate::args::{SolverFlags, SolverKind};
use crate::error::CliError;

/// Result of one run. `report` is `None` for sLORETA.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: TemporalField,
    pub report: Option<SolveReport>,
    /// Wall time of the solve call alone.
    pub seconds: f64,
    pub reg: Option<f64>,
}

impl Outcome {
    pub fn iterations(&self) -> usize {
        self.report.as_ref().map_or(0, |r| r.iterations)
    }

    /// `direct` for sLORETA.
    pub fn termination(&self) -> String {
        self.report
            .as_ref()
            .map_or_else(|| "direct".to_string(), |r| r.termination.to_string())
    }

    pub fn diverged(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.termination == Termination::Diverged)
    }
}

/// Problem for a dataset with placeholder parameters; callers set them with
/// `with_params`.
pub fn dataset_problem(ds: &Dataset) -> Result<Problem, CliError> {
    Ok(Problem::new(
        Arc::new(ds.leadfield.clone()),
        ds.b.clone(),
        Arc::new(ds.mesh.clone()),
        0.0,
        0.0,
        10.0,
    )?)
}

/// Candidate sLORETA regularizations `default * 10^k`, `k = -4..=4`.
pub fn sloreta_candidates(prob: &Problem) -> Vec<f64> {
    let base = default_sloreta_reg(prob);
    (-4..=4).map(|k| base * 10f64.powi(k)).collect()
}

/// Runs `kind` on `base` with the flags' parameters. With `track` set the
/// history records error and residual against `truth`. sLORETA without an
/// explicit `--reg` picks the best candidate against `truth` (or the default
/// without one); only its final solve is timed.
pub fn run_solver(
    kind: SolverKind,
    flags: &SolverFlags,
    base: &Problem,
    truth: Option<&TemporalField>,
    track: bool,
) -> Result<Outcome, CliError> {
    let (lambda, mu) = flags.params(kind);
    let prob = base.with_params(lambda, mu, flags.eta)?;
    let mut cfg = flags.solver_config()?;
    if track {
        cfg.track = truth.map(|t| Arc::new(t.clone()));
    }
    run_with(kind, &prob, &cfg, &flags.loop_config()?, flags, truth)
}

/// As `run_solver` with explicit problem and configurations.
pub fn run_with(
    kind: SolverKind,
    prob: &Problem,
    cfg: &SolverConfig,
    loop_cfg: &SolverConfig,
    flags: &SolverFlags,
    truth: Option<&TemporalField>,
) -> Result<Outcome, CliError> {
    if kind == SolverKind::Sloreta {
        let reg = match (flags.reg, truth) {
            (Some(r), _) => r,
            (None, Some(t)) => sloreta_best_reg(prob, t, &sloreta_candidates(prob))?.0,
            (None, None) => default_sloreta_reg(prob),
        };
        let t0 = Instant::now();
        let x = sloreta_solve(prob, reg)?;
        return Ok(Outcome {
            x,
            report: None,
            seconds: t0.elapsed().as_secs_f64(),
            reg: Some(reg),
        });
    }
    let sched = if kind == SolverKind::Vpalw {
        Some(make_windows(prob.t(), flags.window, flags.overlap)?)
    } else {
        None
    };
    let t0 = Instant::now();
    let rep = match kind {
        SolverKind::Admm => admm_solve(prob, cfg)?,
        SolverKind::Fista => fista_solve(prob, cfg)?,
        SolverKind::Vpal => vpal_solve(prob, cfg)?,
        SolverKind::Vpalw => vpal_windowed_solve(prob, sched.as_ref().expect("set above"), cfg, loop_cfg)?,
        SolverKind::Sloreta => unreachable!(),
    };
    let seconds = t0.elapsed().as_secs_f64();
    Ok(Outcome {
        x: rep.x.clone(),
        report: Some(rep),
        seconds,
        reg: None,
    })
}

/// Each metric on its own; a metric that is undefined for this input is NaN.
pub fn metrics(x: &TemporalField, truth: &TemporalField, ds: &Dataset) -> MetricReport {
    MetricReport {
        psnr: psnr(x, truth).unwrap_or(f64::NAN),
        rel_error: rel_error(x, truth).unwrap_or(f64::NAN),
        ssim: ssim(x, truth).unwrap_or(f64::NAN),
        sed: sed(x, truth, &ds.mesh).unwrap_or(f64::NAN),
        sparsity: sparsity_ratio(x, &ds.mesh).unwrap_or(f64::NAN),
    }
}
