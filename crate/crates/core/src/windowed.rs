//! Sequential windowed VPAL with warm starts, and a streaming front end that
//! reconstructs one new time point per incoming data column.

use std::ops::Range;
use std::time::{Duration, Instant};

use crate::linalg::{DenseMatrix, TemporalField};
use crate::model::{objective, Problem};
use crate::solvers::{
    vpal_solve, vpal_solve_from, SolveReport, SolverConfig, SolverError, Termination, WindowStat,
};

/// Overlapping windows of time indices, 0-based and half-open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSchedule {
    windows: Vec<Range<usize>>,
    overlap: usize,
    t: usize,
}

impl WindowSchedule {
    pub fn windows(&self) -> &[Range<usize>] {
        &self.windows
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    /// Number of time points covered.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// A single window covering `0..t`.
    pub fn single(t: usize) -> Self {
        Self {
            windows: vec![0..t],
            overlap: 0,
            t,
        }
    }
}

/// Windows of `w + 1` points where each window after the first starts
/// `overlap` points before the end of its predecessor. The last window is
/// cut at `t` when the points do not divide evenly.
pub fn make_windows(t: usize, w: usize, overlap: usize) -> Result<WindowSchedule, SolverError> {
    if t < w + 1 {
        return Err(SolverError::InvalidConfig(format!(
            "window of {} points does not fit in T = {t}",
            w + 1
        )));
    }
    if overlap > w {
        return Err(SolverError::InvalidConfig(format!(
            "overlap {overlap} must not exceed w = {w}"
        )));
    }
    let mut windows = vec![0..w + 1];
    while let Some(last) = windows.last() {
        if last.end >= t {
            break;
        }
        let start = last.end - overlap;
        windows.push(start..(start + w + 1).min(t));
    }
    Ok(WindowSchedule { windows, overlap, t })
}

/// Initial guess of `len` columns: the trailing `overlap` columns of `prev`,
/// then copies of its last column.
pub fn warm_start(prev: &TemporalField, overlap: usize, len: usize) -> TemporalField {
    let keep = overlap.min(prev.cols()).min(len);
    let mut x = DenseMatrix::zeros(prev.rows(), len);
    x.set_columns(0, &prev.columns(prev.cols() - keep, prev.cols()));
    if prev.cols() > 0 {
        let last = prev.column(prev.cols() - 1);
        for j in keep..len {
            x.set_column(j, &last);
        }
    }
    x
}

fn window_problem(prob: &Problem, range: &Range<usize>) -> Result<Problem, SolverError> {
    let data = if range.start == 0 && range.end == prob.t() {
        prob.data().clone()
    } else {
        prob.data().columns(range.start, range.end)
    };
    Ok(prob.with_data(data)?)
}

fn untracked(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        track: None,
        ..cfg.clone()
    }
}

fn wrap(index: usize) -> impl FnOnce(SolverError) -> SolverError {
    move |e| SolverError::Window {
        index,
        source: Box::new(e),
    }
}

/// Solves the windows in order. The first uses `cfg_init` from a zero start;
/// each later window uses `cfg_loop` warm-started from its predecessor with
/// fresh multipliers. Overlapping columns are taken from the later window.
pub fn vpal_windowed_solve(
    prob: &Problem,
    sched: &WindowSchedule,
    cfg_init: &SolverConfig,
    cfg_loop: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    if sched.t() != prob.t() || sched.is_empty() {
        return Err(SolverError::InvalidConfig(format!(
            "schedule covers T = {} but the data has T = {}",
            sched.t(),
            prob.t()
        )));
    }
    // Window solves see column slices, so a full-length reference does not apply.
    let (cfg_init, cfg_loop) = (&untracked(cfg_init), &untracked(cfg_loop));
    let start = Instant::now();
    let mut x = DenseMatrix::zeros(prob.n(), prob.t());
    let mut prev: Option<TemporalField> = None;
    let mut out: Option<SolveReport> = None;
    let mut stats = Vec::with_capacity(sched.len());

    for (index, range) in sched.windows().iter().enumerate() {
        let sub = window_problem(prob, range).map_err(wrap(index))?;
        let t0 = Instant::now();
        let rep = match &prev {
            None => vpal_solve(&sub, cfg_init),
            Some(p) => {
                let x0 = warm_start(p, sched.overlap(), range.len());
                vpal_solve_from(&sub, cfg_loop, Some(&x0), None)
            }
        }
        .map_err(wrap(index))?;
        stats.push(WindowStat {
            start: range.start,
            end: range.end,
            iterations: rep.iterations,
            termination: rep.termination,
            time_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        x.set_columns(range.start, &rep.x);
        prev = Some(rep.x.clone());
        out = Some(match out {
            None => rep,
            Some(acc) => merge(acc, rep),
        });
    }

    let mut report = out.expect("schedule is nonempty");
    report.solver = "vpalw".to_string();
    if sched.len() > 1 {
        report.objective = objective(prob, &x)?;
        report.state = None;
    }
    report.x = x;
    report.windows = stats;
    report.timings.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Appends `next` to the running report of earlier windows.
fn merge(mut acc: SolveReport, next: SolveReport) -> SolveReport {
    let offset = acc.iterations;
    acc.history.extend(next.history.into_iter().map(|mut r| {
        r.iter += offset;
        r
    }));
    acc.iterations += next.iterations;
    if acc.termination != Termination::Diverged {
        acc.termination = next.termination;
    }
    acc.fallbacks += next.fallbacks;
    acc.counters.forward += next.counters.forward;
    acc.counters.adjoint += next.counters.adjoint;
    acc.counters.graph += next.counters.graph;
    acc.counters.linear_solves += next.counters.linear_solves;
    acc.counters.flops += next.counters.flops;
    acc.timings.setup_ms += next.timings.setup_ms;
    acc.timings.iterate_ms += next.timings.iterate_ms;
    acc.backtracking.extend(next.backtracking);
    acc.state = next.state;
    acc
}

/// Result of one streaming step.
#[derive(Debug, Clone)]
pub struct StreamOutput {
    /// Reconstruction of the whole current window.
    pub window: TemporalField,
    pub iterations: usize,
    pub termination: Termination,
    pub elapsed: Duration,
}

impl StreamOutput {
    /// The newest reconstructed time point.
    pub fn newest(&self) -> Vec<f64> {
        self.window.column(self.window.cols() - 1)
    }
}

/// One step of the windowed loop with one new time point. `prob_so_far`
/// holds the data seen up to the previous step; only its trailing
/// `prev_window_solution.cols() - 1` columns are read.
pub fn stream_step(
    prob_so_far: &Problem,
    prev_window_solution: &TemporalField,
    new_column: &[f64],
    cfg_loop: &SolverConfig,
) -> Result<StreamOutput, SolverError> {
    let len = prev_window_solution.cols();
    let overlap = len.saturating_sub(1);
    if len == 0 || prob_so_far.t() < overlap {
        return Err(SolverError::InvalidConfig(format!(
            "need {overlap} earlier data columns, have {}",
            prob_so_far.t()
        )));
    }
    if new_column.len() != prob_so_far.p() {
        return Err(SolverError::InvalidConfig(format!(
            "data column has {} entries, expected {}",
            new_column.len(),
            prob_so_far.p()
        )));
    }
    let start = Instant::now();
    let past = prob_so_far.data();
    let mut data = DenseMatrix::zeros(prob_so_far.p(), len);
    data.set_columns(0, &past.columns(past.cols() - overlap, past.cols()));
    data.set_column(len - 1, new_column);
    let sub = prob_so_far.with_data(data)?;
    let x0 = warm_start(prev_window_solution, overlap, len);
    let rep = vpal_solve_from(&sub, &untracked(cfg_loop), Some(&x0), None)?;
    Ok(StreamOutput {
        window: rep.x,
        iterations: rep.iterations,
        termination: rep.termination,
        elapsed: start.elapsed(),
    })
}

/// Stateful streaming reconstructor for windows of `w + 1` points advancing
/// by one column. The first full window is solved cold with `cfg_init`.
#[derive(Debug)]
pub struct StreamingReconstructor {
    template: Problem,
    w: usize,
    cfg_init: SolverConfig,
    cfg_loop: SolverConfig,
    /// Trailing data columns, at most `w + 1`.
    buffer: Vec<Vec<f64>>,
    prev: Option<TemporalField>,
    steps: usize,
}

impl StreamingReconstructor {
    /// `template` supplies the forward operator, mesh and parameters; its data
    /// is ignored.
    pub fn new(template: &Problem, w: usize, cfg_init: SolverConfig, cfg_loop: SolverConfig) -> Self {
        Self {
            template: template.clone(),
            w,
            cfg_init: untracked(&cfg_init),
            cfg_loop: untracked(&cfg_loop),
            buffer: Vec::new(),
            prev: None,
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn buffered(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.template.p(), self.buffer.len());
        for (j, col) in self.buffer.iter().enumerate() {
            d.set_column(j, col);
        }
        d
    }

    /// Feeds one data column. Returns `None` while the first window fills;
    /// afterwards returns the reconstruction of the current window (the first
    /// window's output carries all its columns).
    pub fn push(&mut self, column: &[f64]) -> Result<Option<StreamOutput>, SolverError> {
        if column.len() != self.template.p() {
            return Err(SolverError::InvalidConfig(format!(
                "data column has {} entries, expected {}",
                column.len(),
                self.template.p()
            )));
        }
        let out = match &self.prev {
            None => {
                self.buffer.push(column.to_vec());
                if self.buffer.len() < self.w + 1 {
                    return Ok(None);
                }
                let start = Instant::now();
                let sub = self.template.with_data(self.buffered())?;
                let rep = vpal_solve(&sub, &self.cfg_init)?;
                StreamOutput {
                    window: rep.x,
                    iterations: rep.iterations,
                    termination: rep.termination,
                    elapsed: start.elapsed(),
                }
            }
            Some(prev) => {
                let past = self.template.with_data(self.buffered())?;
                let out = stream_step(&past, prev, column, &self.cfg_loop)?;
                self.buffer.push(column.to_vec());
                out
            }
        };
        while self.buffer.len() > self.w {
            self.buffer.remove(0);
        }
        self.prev = Some(out.window.clone());
        self.steps += 1;
        Ok(Some(out))
    }
}
