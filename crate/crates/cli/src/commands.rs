//! The subcommands.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use log::{info, warn};
use vpal::linalg::io::write_dmat;
use vpal::metrics::MetricReport;
use vpal::sim::{load_dataset, save_dataset, simulate, Dataset, MeshKind};
use vpal::solvers::{SolveReport, SolverError, Termination};
use vpal::windowed::StreamingReconstructor;

use crate::args::{
    Axis, CompareArgs, GridArgs, ScaleArgs, SimulateArgs, SolveArgs, SolverKind, StreamArgs,
};
use crate::error::CliError;
use crate::plot::{Cell, Heatmap, LinePlot, Series};
use crate::report::{cell, num, OutDir, Table};
use crate::runner::{dataset_problem, metrics, run_solver, run_with, Outcome};
use crate::stats::{finite_mean, logspace, Summary};

type Manifest<'a> = &'a [(String, String)];

pub fn simulate_cmd(args: &SimulateArgs, manifest: Manifest) -> Result<(), CliError> {
    let cfg = args.sim.config(MeshKind::Icosphere, 200, 20, args.sim.seed);
    let ds = simulate(&cfg)?;
    save_dataset(&ds, &args.out)?;
    let out = OutDir::create(&args.out)?;
    out.write_manifest("simulate", manifest)?;
    info!("wrote {} ({})", args.out.display(), ds.generator);
    Ok(())
}

fn summary_line(kind: SolverKind, o: &Outcome, m: &MetricReport) -> String {
    let mut s = format!(
        "{kind}: {:.3} s, {} iterations, {}, psnr {:.3}, rel_error {:.4e}, ssim {:.4}, sed {:.4}, sparsity {:.4}",
        o.seconds,
        o.iterations(),
        o.termination(),
        m.psnr,
        m.rel_error,
        m.ssim,
        m.sed,
        m.sparsity
    );
    if let Some(reg) = o.reg {
        s.push_str(&format!(", reg {reg:e}"));
    }
    s
}

/// Writes the results, then fails with `Diverged` if the run diverged.
pub fn solve_cmd(args: &SolveArgs, manifest: Manifest) -> Result<(), CliError> {
    let ds = load_dataset(&args.data)?;
    let base = dataset_problem(&ds)?;
    let o = run_solver(args.solver, &args.solver_flags, &base, Some(&ds.x_true), true)?;
    let out = OutDir::create(&args.out)?;
    write_dmat(out.path("X.dmat"), &o.x)?;
    let history = o
        .report
        .as_ref()
        .map_or_else(|| format!("{}\n", SolveReport::HISTORY_HEADER), SolveReport::history_csv);
    out.write("history.csv", history)?;
    let m = metrics(&o.x, &ds.x_true, &ds);
    let mut t = Table::new(&["method", "psnr", "rel_error", "ssim", "sed", "sparsity", "iterations", "termination"]);
    t.push(metric_row(args.solver.name(), &m, &o.iterations().to_string(), &o.termination()));
    out.write_table("metrics.csv", &t)?;
    let line = summary_line(args.solver, &o, &m);
    out.write("summary.txt", format!("{line}\n"))?;
    out.write_manifest("solve", manifest)?;
    println!("{line}");
    if o.diverged() {
        return Err(CliError::Diverged(args.solver.to_string()));
    }
    Ok(())
}

fn metric_row(method: &str, m: &MetricReport, iterations: &str, termination: &str) -> Vec<String> {
    vec![
        method.to_string(),
        num(m.psnr),
        num(m.rel_error),
        num(m.ssim),
        num(m.sed),
        num(m.sparsity),
        iterations.to_string(),
        cell(termination),
    ]
}

/// Distinct values in first-seen order, joined by `;`.
fn distinct(items: &[String]) -> String {
    let mut seen: Vec<&str> = Vec::new();
    for s in items {
        if !seen.contains(&s.as_str()) {
            seen.push(s);
        }
    }
    seen.join(";")
}

#[derive(Debug, Default)]
struct MethodRuns {
    seconds: Vec<f64>,
    metrics: Vec<MetricReport>,
    iterations: Vec<f64>,
    terminations: Vec<String>,
    history: Option<SolveReport>,
}

impl MethodRuns {
    fn mean_metrics(&self) -> MetricReport {
        let f = |g: fn(&MetricReport) -> f64| finite_mean(&self.metrics.iter().map(g).collect::<Vec<_>>());
        if self.metrics.is_empty() {
            return MetricReport {
                psnr: f64::NAN,
                rel_error: f64::NAN,
                ssim: f64::NAN,
                sed: f64::NAN,
                sparsity: f64::NAN,
            };
        }
        MetricReport {
            psnr: f(|m| m.psnr),
            rel_error: f(|m| m.rel_error),
            ssim: f(|m| m.ssim),
            sed: f(|m| m.sed),
            sparsity: f(|m| m.sparsity),
        }
    }
}

fn load_or_simulate(
    data: Option<&std::path::Path>,
    sim: &crate::args::SimFlags,
    defaults: (MeshKind, usize, usize),
    trial: usize,
) -> Result<Dataset, CliError> {
    match data {
        Some(d) => Ok(load_dataset(d)?),
        None => {
            let cfg = sim.config(defaults.0, defaults.1, defaults.2, sim.seed + trial as u64);
            Ok(simulate(&cfg)?)
        }
    }
}

/// All methods on the same data for each trial. Failures are recorded per
/// method and do not stop the run.
pub fn compare_cmd(args: &CompareArgs, manifest: Manifest) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let out = OutDir::create(&args.out)?;
    let mut runs: BTreeMap<SolverKind, MethodRuns> = BTreeMap::new();
    for trial in 0..args.trials {
        let ds = load_or_simulate(args.data.as_deref(), &args.sim, (MeshKind::Icosphere, 1000, 20), trial)?;
        let base = dataset_problem(&ds)?;
        for &kind in &args.solvers {
            let entry = runs.entry(kind).or_default();
            match run_solver(kind, &args.solver_flags, &base, Some(&ds.x_true), false) {
                Ok(o) => {
                    info!("trial {trial} {kind}: {:.3} s, {}", o.seconds, o.termination());
                    entry.seconds.push(o.seconds);
                    entry.metrics.push(metrics(&o.x, &ds.x_true, &ds));
                    entry.iterations.push(o.iterations() as f64);
                    entry.terminations.push(o.termination());
                }
                Err(e) => {
                    warn!("trial {trial} {kind}: {e}");
                    entry.terminations.push(format!("error: {e}"));
                }
            }
            if trial == 0 && kind != SolverKind::Sloreta && entry.seconds.len() == 1 {
                match run_solver(kind, &args.solver_flags, &base, Some(&ds.x_true), true) {
                    Ok(o) => entry.history = o.report,
                    Err(e) => warn!("{kind} tracked run: {e}"),
                }
            }
        }
    }

    let mut mtab = Table::new(&["method", "psnr", "rel_error", "ssim", "sed", "sparsity", "iterations", "termination"]);
    let mut table = Table::new(&["method", "runtime_s", "psnr", "rel_error", "ssim", "sed", "sparsity"]);
    let mut timings = Table::new(&["method", "mean_s", "std_s", "median_s", "trials"]);
    let mut summary = String::new();
    let mut err_series = Vec::new();
    let mut res_series = Vec::new();
    for &kind in &args.solvers {
        let Some(r) = runs.get(&kind) else { continue };
        let m = r.mean_metrics();
        let iters = if r.iterations.is_empty() { f64::NAN } else { finite_mean(&r.iterations) };
        mtab.push(metric_row(kind.name(), &m, &num(iters), &distinct(&r.terminations)));
        let s = Summary::of(&r.seconds);
        let mean = s.map_or(f64::NAN, |s| s.mean);
        table.push(vec![
            kind.name().into(),
            num(mean),
            num(m.psnr),
            num(m.rel_error),
            num(m.ssim),
            num(m.sed),
            num(m.sparsity),
        ]);
        if let Some(s) = s {
            timings.push(vec![kind.name().into(), num(s.mean), num(s.std), num(s.median), s.count.to_string()]);
        }
        summary.push_str(&format!(
            "{kind}: runtime {:.3} s over {} trials, rel_error {:.4e}, sparsity {:.4}, {}\n",
            mean,
            r.seconds.len(),
            m.rel_error,
            m.sparsity,
            distinct(&r.terminations)
        ));
        if let Some(h) = &r.history {
            out.write(&format!("history_{kind}.csv"), h.history_csv())?;
            let pts = |f: fn(&vpal::solvers::IterRecord) -> f64| -> Vec<(f64, f64)> {
                h.history.iter().map(|rec| (rec.time_ms / 1e3, f(rec))).collect()
            };
            err_series.push(Series { name: kind.name().into(), points: pts(|r| r.rel_error), err: None });
            res_series.push(Series { name: kind.name().into(), points: pts(|r| r.residual), err: None });
        }
    }
    out.write_table("metrics.csv", &mtab)?;
    out.write_table("table.csv", &table)?;
    out.write_table("timings.csv", &timings)?;
    for (name, label, series) in [("rel_error", "relative error", err_series), ("residual", "relative residual", res_series)] {
        let plot = LinePlot {
            title: format!("{label} vs wall time"),
            x_label: "time (s)".into(),
            y_label: label.into(),
            log_x: false,
            log_y: true,
            series,
        };
        out.write_svg(&format!("{name}.svg"), plot.render())?;
    }
    out.write("summary.txt", &summary)?;
    out.write_manifest("compare", manifest)?;
    print!("{summary}");
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
enum CellStatus {
    Ok,
    Intractable(String),
    Error(String),
}

impl CellStatus {
    fn label(&self) -> &str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Intractable(_) => "intractable",
            CellStatus::Error(_) => "error",
        }
    }
}

/// Accumulated runs for one axis value.
#[derive(Debug, Default)]
struct ScaleCell {
    nodes: usize,
    times: BTreeMap<SolverKind, Vec<f64>>,
    status: BTreeMap<SolverKind, CellStatus>,
    windows: Vec<f64>,
}

/// Runtime sweeps over the mesh size or the number of time points.
pub fn scale_cmd(args: &ScaleArgs, manifest: Manifest) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let (axis_name, values, solvers) = match args.axis {
        Axis::N => (
            "n",
            if args.values.is_empty() { vec![200, 1000, 2000] } else { args.values.clone() },
            if args.solvers.is_empty() {
                vec![SolverKind::Admm, SolverKind::Vpal, SolverKind::Vpalw]
            } else {
                args.solvers.clone()
            },
        ),
        Axis::T => (
            "T",
            if args.values.is_empty() { (1..=10).map(|k| 10 * k).collect() } else { args.values.clone() },
            if args.solvers.is_empty() { vec![SolverKind::Vpal, SolverKind::Vpalw] } else { args.solvers.clone() },
        ),
    };
    if !(args.cell_timeout > 0.0) {
        return Err(CliError::Usage("--cell-timeout must be positive".into()));
    }
    let out = OutDir::create(&args.out)?;
    let mut flags = args.solver_flags.clone();
    if flags.time_limit.is_none() {
        flags.time_limit = Some(args.cell_timeout);
    }
    let mut runtime = Table::new(&["axis", "value", "nodes", "method", "mean_s", "std_s", "median_s", "trials", "status"]);
    let mut latency = Table::new(&["value", "method", "mean_ms", "std_ms", "median_ms", "cv", "count"]);
    let mut curves: BTreeMap<SolverKind, Series> = BTreeMap::new();
    let mut cells: Vec<ScaleCell> = values.iter().map(|_| ScaleCell::default()).collect();
    // Trials run outermost so a slow spell of the machine is spread over all
    // values instead of landing on one of them.
    for trial in 0..args.trials {
        for (&v, cell) in values.iter().zip(cells.iter_mut()) {
            let (n, t) = match args.axis {
                Axis::N => (v, args.sim.t.unwrap_or(20)),
                Axis::T => (args.sim.n.unwrap_or(200), v),
            };
            let mut sim = args.sim.clone();
            sim.n = Some(n);
            sim.t = Some(t);
            let ds = load_or_simulate(None, &sim, (MeshKind::RandomGeometric, n, t), trial)?;
            cell.nodes = ds.mesh.num_nodes();
            let base = dataset_problem(&ds)?;
            for &kind in &solvers {
                if cell.status.get(&kind).is_some_and(|s| *s != CellStatus::Ok) {
                    continue;
                }
                if kind == SolverKind::Admm && cell.nodes > args.admm_max_n {
                    let reason = format!("n = {} above --admm-max-n", cell.nodes);
                    cell.status.insert(kind, CellStatus::Intractable(reason));
                    continue;
                }
                let st = match run_solver(kind, &flags, &base, None, false) {
                    Ok(o) if o.report.as_ref().is_some_and(|r| r.termination == Termination::TimeLimit) => {
                        CellStatus::Intractable("time limit".into())
                    }
                    Ok(o) => {
                        cell.times.entry(kind).or_default().push(o.seconds);
                        if let Some(r) = &o.report {
                            cell.windows.extend(r.windows.iter().skip(1).map(|w| w.time_ms));
                        }
                        CellStatus::Ok
                    }
                    Err(CliError::Solver(SolverError::Intractable { reason })) => CellStatus::Intractable(reason),
                    Err(e) => CellStatus::Error(e.to_string()),
                };
                if let CellStatus::Intractable(r) | CellStatus::Error(r) = &st {
                    warn!("{axis_name} = {v}, {kind}: {r}");
                }
                cell.status.insert(kind, st);
            }
        }
    }
    for (&v, cell) in values.iter().zip(&cells) {
        let nodes = cell.nodes;
        for &kind in &solvers {
            let st = cell.status.get(&kind).cloned().unwrap_or(CellStatus::Ok);
            let s = if st == CellStatus::Ok { cell.times.get(&kind).and_then(|t| Summary::of(t)) } else { None };
            runtime.push(vec![
                axis_name.into(),
                v.to_string(),
                nodes.to_string(),
                kind.name().into(),
                num(s.map_or(f64::NAN, |s| s.mean)),
                num(s.map_or(f64::NAN, |s| s.std)),
                num(s.map_or(f64::NAN, |s| s.median)),
                s.map_or(0, |s| s.count).to_string(),
                st.label().into(),
            ]);
            if let Some(s) = s {
                let x = if args.axis == Axis::N { nodes as f64 } else { v as f64 };
                let c = curves.entry(kind).or_insert_with(|| Series {
                    name: kind.name().into(),
                    points: Vec::new(),
                    err: Some(Vec::new()),
                });
                c.points.push((x, s.mean));
                c.err.as_mut().expect("set above").push(s.std);
            }
        }
        if let Some(s) = Summary::of(&cell.windows) {
            latency.push(vec![
                v.to_string(),
                SolverKind::Vpalw.name().into(),
                num(s.mean),
                num(s.std),
                num(s.median),
                num(s.cv()),
                s.count.to_string(),
            ]);
        }
    }
    out.write_table("runtime.csv", &runtime)?;
    out.write_table("latency.csv", &latency)?;
    let plot = LinePlot {
        title: format!("mean runtime vs {axis_name}"),
        x_label: if args.axis == Axis::N { "nodes".into() } else { "time points".into() },
        y_label: "runtime (s)".into(),
        log_x: false,
        log_y: false,
        series: curves.into_values().collect(),
    };
    out.write_svg("runtime.svg", plot.render())?;
    out.write("summary.txt", runtime.to_csv())?;
    out.write_manifest("scale", manifest)?;
    print!("{}", runtime.to_csv());
    Ok(())
}

/// Final relative error over a log grid of `(mu, lambda)`.
pub fn grid_cmd(args: &GridArgs, manifest: Manifest) -> Result<(), CliError> {
    if args.points == 0 || !(args.min > 0.0 && args.max >= args.min) {
        return Err(CliError::Usage("grid needs --points >= 1 and 0 < --min <= --max".into()));
    }
    let mut values = logspace(args.min, args.max, args.points);
    if args.include_zero {
        values.insert(0, 0.0);
    }
    let ds = load_or_simulate(args.data.as_deref(), &args.sim, (MeshKind::Icosphere, 200, 20), 0)?;
    let base = dataset_problem(&ds)?;
    let cfg = args.solver_flags.solver_config()?;
    let loop_cfg = args.solver_flags.loop_config()?;
    let out = OutDir::create(&args.out)?;
    let mut best = Table::new(&["method", "mu", "lambda", "rel_error"]);
    let mut header = vec!["mu\\lambda".to_string()];
    header.extend(values.iter().map(|v| num(*v)));
    for &kind in &args.solvers {
        let mut table = Table { header: header.clone(), rows: Vec::new() };
        let mut cells = Vec::new();
        let mut argmin: Option<(f64, f64, f64)> = None;
        for &mu in &values {
            let mut row = vec![num(mu)];
            let mut hrow = Vec::new();
            for &lambda in &values {
                let result = base
                    .with_params(lambda, mu, args.solver_flags.eta)
                    .map_err(CliError::from)
                    .and_then(|p| run_with(kind, &p, &cfg, &loop_cfg, &args.solver_flags, Some(&ds.x_true)));
                let c = match result {
                    Ok(o) if o.diverged() || !o.x.is_finite() => Cell::Label("div".into()),
                    Ok(o) => {
                        let re = metrics(&o.x, &ds.x_true, &ds).rel_error;
                        if argmin.is_none_or(|b| re < b.2) {
                            argmin = Some((mu, lambda, re));
                        }
                        Cell::Value(re)
                    }
                    Err(e) => {
                        warn!("{kind} mu = {mu:e}, lambda = {lambda:e}: {e}");
                        Cell::Label("err".into())
                    }
                };
                row.push(match &c {
                    Cell::Value(v) => num(*v),
                    Cell::Label(s) => s.clone(),
                });
                hrow.push(c);
            }
            table.push(row);
            cells.push(hrow);
        }
        out.write_table(&format!("grid_{kind}.csv"), &table)?;
        let ticks: Vec<String> = values.iter().map(|v| format!("{v:.0e}")).collect();
        let heat = Heatmap {
            title: format!("{kind}: final relative error"),
            x_label: "lambda".into(),
            y_label: "mu".into(),
            x_ticks: ticks.clone(),
            y_ticks: ticks,
            cells,
        };
        out.write_svg(&format!("grid_{kind}.svg"), heat.render())?;
        match argmin {
            Some((mu, lambda, re)) => best.push(vec![kind.name().into(), num(mu), num(lambda), num(re)]),
            None => best.push(vec![kind.name().into(), "NaN".into(), "NaN".into(), "NaN".into()]),
        }
    }
    out.write_table("argmin.csv", &best)?;
    out.write("summary.txt", best.to_csv())?;
    out.write_manifest("grid", manifest)?;
    print!("{}", best.to_csv());
    Ok(())
}

fn parse_line(line: &str, p: usize, lineno: usize) -> Result<Vec<f64>, CliError> {
    let vals: Vec<f64> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("input line {lineno}: {e}")))?;
    if vals.len() != p {
        return Err(CliError::Usage(format!(
            "input line {lineno}: expected {p} values, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn write_row(out: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    let s: Vec<String> = v.iter().map(|x| num(*x)).collect();
    writeln!(out, "{}", s.join(" "))
}

/// Reads one data column of `p` values per line and writes the newest
/// reconstructed time point (`n` values) per line. Timing goes to `log`.
pub fn stream_cmd(
    args: &StreamArgs,
    input: impl BufRead,
    mut output: impl Write,
    mut log: impl Write,
) -> Result<(), CliError> {
    let ds = load_dataset(&args.data)?;
    let (lambda, mu) = args.solver_flags.params(SolverKind::Vpalw);
    let template = dataset_problem(&ds)?.with_params(lambda, mu, args.solver_flags.eta)?;
    let mut rec = StreamingReconstructor::new(
        &template,
        args.solver_flags.window,
        args.solver_flags.solver_config()?,
        args.solver_flags.loop_config()?,
    );
    let io_err = |e| CliError::io("<stdout>", e);
    let mut diverged = false;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CliError::io("<stdin>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let col = parse_line(&line, template.p(), i + 1)?;
        let Some(step) = rec.push(&col)? else { continue };
        diverged |= step.termination == Termination::Diverged;
        if rec.steps() == 1 {
            for j in 0..step.window.cols() {
                write_row(&mut output, &step.window.column(j)).map_err(io_err)?;
            }
        } else {
            write_row(&mut output, &step.newest()).map_err(io_err)?;
        }
        output.flush().map_err(io_err)?;
        let _ = writeln!(
            log,
            "step {}: {:.3} ms, {} iterations, {}",
            rec.steps(),
            step.elapsed.as_secs_f64() * 1e3,
            step.iterations,
            step.termination
        );
    }
    if diverged {
        return Err(CliError::Diverged("vpalw".into()));
    }
    Ok(())
}
