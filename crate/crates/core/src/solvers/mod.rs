//! Reconstruction algorithms and their shared configuration, reporting and
//! termination logic.

mod admm;
mod fista;
mod line;
mod sloreta;
mod vpal;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::linalg::{LinalgError, TemporalField};
use crate::model::{Iterate, ModelError, Problem};

pub use admm::{admm_estimate, admm_solve, admm_solve_from, AdmmEstimate};
pub use fista::{estimate_lipschitz, fista_solve};
pub use line::{step_backtracking, step_linearized, step_optimal_1d};
pub use sloreta::{default_sloreta_reg, min_norm_solve, sloreta_best_reg, sloreta_solve};
pub use vpal::{compute_beta, vpal_solve, vpal_solve_from, vpal_solve_observed, InnerView};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("ill-posed configuration: {0}")]
    IllPosed(String),
    #[error("intractable: {reason}")]
    Intractable { reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("window {index}: {source}")]
    Window {
        index: usize,
        #[source]
        source: Box<SolverError>,
    },
}

/// Failures of the line-search and momentum helpers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("search direction is zero")]
    ZeroDirection,
    #[error("degenerate curvature along direction (denominator {0:e})")]
    Degenerate(f64),
    #[error("no bracket found after {0} expansions")]
    Bracket(usize),
    #[error("backtracking step underflowed to {0:e}")]
    Underflow(f64),
    #[error("previous gradient is zero")]
    ZeroGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    Linearized,
    Optimal1d,
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaMode {
    FletcherReeves,
    PolakRibiere,
    Hybrid,
}

impl FromStr for StepMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linearized" => Ok(Self::Linearized),
            "optimal_1d" | "optimal" => Ok(Self::Optimal1d),
            "backtracking" => Ok(Self::Backtracking),
            _ => Err(format!("unknown step mode `{s}`")),
        }
    }
}

impl FromStr for BetaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fr" => Ok(Self::FletcherReeves),
            "pr" => Ok(Self::PolakRibiere),
            "hybrid" => Ok(Self::Hybrid),
            _ => Err(format!("unknown beta mode `{s}`")),
        }
    }
}

/// Armijo-with-slack parameters: accept `alpha = rho^k` once
/// `phi(X - alpha S) <= phi(X) - delta ||alpha S||^2 + eps0 * eps_decay^j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktrackingParams {
    pub delta: f64,
    pub rho: f64,
    pub eps0: f64,
    pub eps_decay: f64,
}

impl Default for BacktrackingParams {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            rho: 0.5,
            eps0: 1e-3,
            eps_decay: 0.5,
        }
    }
}

impl BacktrackingParams {
    pub fn slack(&self, j: usize) -> f64 {
        self.eps0 * self.eps_decay.powi(j.min(i32::MAX as usize) as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub inner_iters: usize,
    pub step_mode: StepMode,
    pub beta_mode: BetaMode,
    pub backtracking: BacktrackingParams,
    /// FISTA step is `1 / lipschitz`.
    pub lipschitz: f64,
    pub prox_tol: f64,
    pub prox_max_iter: usize,
    pub record_history: bool,
    /// Consecutive objective increases that count as divergence.
    pub divergence_window: usize,
    pub time_limit: Option<Duration>,
    /// ADMM preflight: refuse when the dense factorizations need more memory.
    pub admm_memory_limit: u64,
    /// ADMM preflight: assumed sustained flop rate for the time estimate.
    pub admm_flop_rate: f64,
    /// Reference field; when set, every history record also carries the
    /// relative error against it and the relative data residual.
    pub track: Option<Arc<TemporalField>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 1000,
            inner_iters: 2,
            step_mode: StepMode::Linearized,
            beta_mode: BetaMode::Hybrid,
            backtracking: BacktrackingParams::default(),
            lipschitz: 1000.0,
            prox_tol: 1e-6,
            prox_max_iter: 50,
            record_history: true,
            divergence_window: 10,
            time_limit: None,
            admm_memory_limit: 4 << 30,
            admm_flop_rate: 1e10,
            track: None,
        }
    }
}

impl SolverConfig {
    /// Defaults for warm-started windows after the first.
    pub fn loop_default() -> Self {
        Self {
            max_iter: 100,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.inner_iters == 0 {
            return bad("inner_iters must be at least 1".into());
        }
        let bt = &self.backtracking;
        if !(bt.rho > 0.0 && bt.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", bt.rho));
        }
        if !(bt.delta > 0.0) || !(bt.eps0 > 0.0) {
            return bad("backtracking delta and eps0 must be positive".into());
        }
        if !(bt.eps_decay > 0.0 && bt.eps_decay < 1.0) {
            return bad(format!("eps_decay must lie in (0, 1), got {}", bt.eps_decay));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return bad(format!("lipschitz must be positive, got {}", self.lipschitz));
        }
        if !(self.prox_tol > 0.0) || self.prox_max_iter == 0 {
            return bad("prox_tol must be positive and prox_max_iter at least 1".into());
        }
        if self.divergence_window == 0 {
            return bad("divergence_window must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
    Diverged,
    TimeLimit,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::Diverged => "diverged",
            Termination::TimeLimit => "time_limit",
        })
    }
}

/// One completed (outer) iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub rel_change_x: f64,
    pub rel_change_f: f64,
    /// `||X - X_ref|| / ||X_ref||`, NaN unless tracking.
    pub rel_error: f64,
    /// `||L X - B|| / ||B||`, NaN unless tracking.
    pub residual: f64,
    /// Wall time since the start of the solve.
    pub time_ms: f64,
}

impl IterRecord {
    /// Equality ignoring `time_ms`, bit for bit on the numeric fields.
    pub fn same_numbers(&self, other: &IterRecord) -> bool {
        self.iter == other.iter
            && self.objective.to_bits() == other.objective.to_bits()
            && self.rel_change_x.to_bits() == other.rel_change_x.to_bits()
            && self.rel_change_f.to_bits() == other.rel_change_f.to_bits()
            && self.rel_error.to_bits() == other.rel_error.to_bits()
            && self.residual.to_bits() == other.residual.to_bits()
    }
}

/// One accepted backtracking step, with `h` the augmented Lagrangian
/// (without its constant multiplier term) at the joint iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktrackRecord {
    pub outer: usize,
    /// Global inner-step counter used for the slack sequence.
    pub j: usize,
    pub alpha: f64,
    pub eps: f64,
    pub h_before: f64,
    pub h_after: f64,
    /// `h` at the start of the current outer iteration.
    pub h_outer_start: f64,
    /// Slack accumulated since the start of the current outer iteration.
    pub slack_sum: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OpCounters {
    pub forward: usize,
    pub adjoint: usize,
    pub graph: usize,
    pub linear_solves: usize,
    pub flops: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub setup_ms: f64,
    pub iterate_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowStat {
    /// Half-open, 0-based column range.
    pub start: usize,
    pub end: usize,
    pub iterations: usize,
    pub termination: Termination,
    pub time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solver: String,
    pub x: TemporalField,
    /// Final `(X, Y, C)` for splitting methods.
    pub state: Option<Iterate>,
    pub iterations: usize,
    pub objective: f64,
    pub history: Vec<IterRecord>,
    pub termination: Termination,
    pub timings: PhaseTimings,
    /// Step-rule fallbacks taken (linearized <-> optimal_1d).
    pub fallbacks: usize,
    pub counters: OpCounters,
    pub backtracking: Vec<BacktrackRecord>,
    /// Inner iterations spent in subproblem solves (FISTA prox).
    pub inner_iterations: usize,
    pub windows: Vec<WindowStat>,
}

impl SolveReport {
    pub(crate) fn new(solver: &str, x: TemporalField) -> Self {
        Self {
            solver: solver.to_string(),
            x,
            state: None,
            iterations: 0,
            objective: f64::NAN,
            history: Vec::new(),
            termination: Termination::MaxIter,
            timings: PhaseTimings::default(),
            fallbacks: 0,
            counters: OpCounters::default(),
            backtracking: Vec::new(),
            inner_iterations: 0,
            windows: Vec::new(),
        }
    }

    pub fn objective_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.objective).collect()
    }

    pub fn rel_change_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.rel_change_x).collect()
    }

    pub const HISTORY_HEADER: &'static str = "iter,objective,rel_change_x,rel_change_f,rel_error,residual,time_ms";

    /// One row per history record under `HISTORY_HEADER`.
    pub fn history_csv(&self) -> String {
        let mut s = format!("{}\n", Self::HISTORY_HEADER);
        for r in &self.history {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:.3}\n",
                r.iter, r.objective, r.rel_change_x, r.rel_change_f, r.rel_error, r.residual, r.time_ms
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Converged,
    Diverged,
}

/// Termination test on the history of completed iterations.
///
/// Converged when both relative changes of the latest record are within
/// `tol`. Diverged on a non-finite value, or after `window` consecutive
/// objective increases ending above the first recorded objective.
pub fn check_convergence(history: &[IterRecord], tol: f64) -> Decision {
    check_convergence_with(history, tol, 10)
}

pub fn check_convergence_with(history: &[IterRecord], tol: f64, window: usize) -> Decision {
    let Some(last) = history.last() else {
        return Decision::Continue;
    };
    if !last.objective.is_finite() || last.rel_change_x.is_nan() || last.rel_change_f.is_nan() {
        return Decision::Diverged;
    }
    if history.len() > window {
        let tail = &history[history.len() - window - 1..];
        let rising = tail.windows(2).all(|w| w[1].objective > w[0].objective);
        if rising && last.objective > history[0].objective {
            return Decision::Diverged;
        }
    }
    if last.rel_change_x <= tol && last.rel_change_f <= tol {
        return Decision::Converged;
    }
    Decision::Continue
}

/// `||a - b|| / max(||b||, 1e-12)`.
pub fn rel_change(new: &TemporalField, old: &TemporalField) -> f64 {
    new.dist(old) / old.norm().max(1e-12)
}

pub fn rel_change_scalar(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(1e-12)
}

/// Shared iteration bookkeeping: history, termination, time limit.
pub(crate) struct Monitor {
    start: Instant,
    history: Vec<IterRecord>,
    tol: f64,
    window: usize,
    max_iter: usize,
    time_limit: Option<Duration>,
    prev_objective: f64,
    track: Option<(Arc<TemporalField>, f64, f64)>,
}

impl Monitor {
    pub(crate) fn new(cfg: &SolverConfig, prob: &Problem, start: Instant, f0: f64) -> Result<Self, SolverError> {
        let track = match &cfg.track {
            Some(truth) => {
                prob.check_x(truth)?;
                Some((truth.clone(), truth.norm().max(1e-300), prob.data().norm().max(1e-300)))
            }
            None => None,
        };
        Ok(Self {
            start,
            history: Vec::new(),
            tol: cfg.tol,
            window: cfg.divergence_window,
            max_iter: cfg.max_iter,
            time_limit: cfg.time_limit,
            prev_objective: f0,
            track,
        })
    }

    pub(crate) fn elapsed_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }

    /// Records iteration `k` (1-based) and decides whether to stop.
    pub(crate) fn record(
        &mut self,
        k: usize,
        objective: f64,
        rel_x: f64,
        prob: &Problem,
        x: &TemporalField,
    ) -> Option<Termination> {
        let (rel_error, residual) = match &self.track {
            Some((truth, tn, bn)) => (x.dist(truth) / tn, prob.residual(x).norm() / bn),
            None => (f64::NAN, f64::NAN),
        };
        let rec = IterRecord {
            iter: k,
            objective,
            rel_change_x: rel_x,
            rel_change_f: rel_change_scalar(objective, self.prev_objective),
            rel_error,
            residual,
            time_ms: self.elapsed_ms(),
        };
        self.prev_objective = objective;
        self.history.push(rec);
        match check_convergence_with(&self.history, self.tol, self.window) {
            Decision::Converged => return Some(Termination::Converged),
            Decision::Diverged => return Some(Termination::Diverged),
            Decision::Continue => {}
        }
        if k >= self.max_iter {
            return Some(Termination::MaxIter);
        }
        if let Some(limit) = self.time_limit {
            if self.start.elapsed() >= limit {
                return Some(Termination::TimeLimit);
            }
        }
        None
    }

    pub(crate) fn finish(self, report: &mut SolveReport, record_history: bool, setup_ms: f64) {
        let total = self.elapsed_ms();
        report.iterations = self.history.len();
        if let Some(last) = self.history.last() {
            report.objective = last.objective;
        }
        report.timings = PhaseTimings {
            setup_ms,
            iterate_ms: total - setup_ms,
            total_ms: total,
        };
        if record_history {
            report.history = self.history;
        }
    }
}
