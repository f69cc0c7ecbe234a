//! Command-line definitions and `--config` handling.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use vpal::sim::{MeshKind, SimConfig, SourceSpec};
use vpal::solvers::{BetaMode, SolverConfig, StepMode};

use crate::error::CliError;

#[derive(Debug, Clone, Parser)]
#[command(name = "vpal", version, about = "Spatio-temporal source reconstruction experiments")]
pub struct Cli {
    /// File of key=value lines; its entries override command-line flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Run one solver on a dataset.
    Solve(SolveArgs),
    /// Run every method on the same data and tabulate runtime and accuracy.
    Compare(CompareArgs),
    /// Runtime as a function of the mesh size or the number of time points.
    Scale(ScaleArgs),
    /// Final relative error over a (mu, lambda) grid.
    Grid(GridArgs),
    /// Reconstruct one time point per data line read from stdin.
    Stream(StreamArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum)]
pub enum SolverKind {
    Sloreta,
    Admm,
    Fista,
    Vpal,
    Vpalw,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Sloreta,
        SolverKind::Admm,
        SolverKind::Fista,
        SolverKind::Vpal,
        SolverKind::Vpalw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Sloreta => "sloreta",
            SolverKind::Admm => "admm",
            SolverKind::Fista => "fista",
            SolverKind::Vpal => "vpal",
            SolverKind::Vpalw => "vpalw",
        }
    }

    /// Default `(lambda, mu)`.
    pub fn default_params(self) -> (f64, f64) {
        match self {
            SolverKind::Admm => (0.1, 1e-3),
            SolverKind::Fista => (1e-3, 1e-4),
            SolverKind::Vpal | SolverKind::Vpalw => (1e-5, 1e-3),
            SolverKind::Sloreta => (0.0, 0.0),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Synthetic data generation. Size flags left unset take per-command defaults.
#[derive(Debug, Clone, Args)]
pub struct SimFlags {
    #[arg(long, value_parser = clap::value_parser!(MeshKind))]
    pub kind: Option<MeshKind>,
    /// Target number of mesh nodes.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of time points.
    #[arg(long = "T", id = "T")]
    pub t: Option<usize>,
    /// Number of sensors (default grows with n).
    #[arg(long)]
    pub sensors: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub sources: usize,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// Source spread in hops per time step.
    #[arg(long, default_value_t = 0.5)]
    pub speed: f64,
    #[arg(long, default_value_t = 0.5)]
    pub decay: f64,
    /// Relative noise level `||E|| / ||L X||`.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SimFlags {
    pub fn config(&self, kind: MeshKind, n: usize, t: usize, seed: u64) -> SimConfig {
        SimConfig {
            kind: self.kind.unwrap_or(kind),
            n: self.n.unwrap_or(n),
            t: self.t.unwrap_or(t),
            p: self.sensors,
            sources: SourceSpec {
                num_sources: self.sources,
                amplitude: self.amplitude,
                propagation_speed: self.speed,
                decay: self.decay,
            },
            noise: self.noise,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    /// Temporal smoothing weight; unset uses the solver default.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Spatial sparsity weight; unset uses the solver default.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value = "linearized", value_parser = clap::value_parser!(StepMode))]
    pub step_mode: StepMode,
    #[arg(long, default_value = "hybrid", value_parser = clap::value_parser!(BetaMode))]
    pub beta: BetaMode,
    #[arg(long, default_value_t = 2)]
    pub inner_iters: usize,
    /// FISTA step size is 1 / lipschitz.
    #[arg(long, default_value_t = 1000.0)]
    pub lipschitz: f64,
    /// Windowed VPAL: each window spans `window + 1` time points.
    #[arg(long, default_value_t = 1)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub overlap: usize,
    /// Iteration cap for warm-started windows.
    #[arg(long, default_value_t = 100)]
    pub loop_max_iter: usize,
    /// sLORETA regularization; unset picks the best of a log grid against the truth.
    #[arg(long)]
    pub reg: Option<f64>,
    /// Per-solve wall-clock limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
}

impl SolverFlags {
    pub fn params(&self, kind: SolverKind) -> (f64, f64) {
        let (l, m) = kind.default_params();
        (self.lambda.unwrap_or(l), self.mu.unwrap_or(m))
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let time_limit = match self.time_limit {
            None => None,
            Some(s) if s > 0.0 && s.is_finite() => Some(Duration::from_secs_f64(s)),
            Some(s) => return Err(CliError::Usage(format!("--time-limit must be positive, got {s}"))),
        };
        let cfg = SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            inner_iters: self.inner_iters,
            step_mode: self.step_mode,
            beta_mode: self.beta,
            lipschitz: self.lipschitz,
            time_limit,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn loop_config(&self) -> Result<SolverConfig, CliError> {
        Ok(SolverConfig {
            max_iter: self.loop_max_iter,
            ..self.solver_config()?
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub solver: SolverKind,
    /// Dataset directory written by `simulate`.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub solver_flags: SolverFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Dataset directory; without it each trial simulates with seed + trial.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub solver_flags: SolverFlags,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sloreta,admm,fista,vpal,vpalw")]
    pub solvers: Vec<SolverKind>,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    N,
    #[value(name = "T", alias = "t")]
    T,
}

#[derive(Debug, Clone, Args)]
pub struct ScaleArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Axis values (default 200,1000,2000 for n and 10,20,..,100 for T).
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<usize>,
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub solver_flags: SolverFlags,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub solvers: Vec<SolverKind>,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    /// ADMM is recorded as intractable above this many nodes.
    #[arg(long, default_value_t = 1000)]
    pub admm_max_n: usize,
    /// Per-cell limit in seconds; exceeding it marks the cell intractable.
    #[arg(long, default_value_t = 1800.0)]
    pub cell_timeout: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub solver_flags: SolverFlags,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "admm,vpal,fista")]
    pub solvers: Vec<SolverKind>,
    #[arg(long, default_value_t = 8)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub min: f64,
    #[arg(long, default_value_t = 1e2)]
    pub max: f64,
    /// Prepend 0 to both axes.
    #[arg(long)]
    pub include_zero: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct StreamArgs {
    /// Dataset supplying the lead field and mesh; its data are not used.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub solver_flags: SolverFlags,
}

/// `--config FILE` (or `--config=FILE`) anywhere in `argv`.
fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Turns `key=value` lines into flags. `true` gives a bare flag and `false`
/// drops the key; `#` starts a comment line.
pub fn config_flags(text: &str) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, found {line:?}", i + 1)))?;
        let (k, v) = (k.trim().replace('_', "-"), v.trim());
        if k.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
        }
        if k == "config" {
            continue;
        }
        match v {
            "true" => out.push(format!("--{k}")),
            "false" => {}
            _ => {
                out.push(format!("--{k}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

/// Parses `argv` (program name first) with config entries appended so that
/// they take precedence over earlier flags.
pub fn parse(argv: &[String]) -> Result<(Cli, ArgMatches), clap::Error> {
    let mut full = argv.to_vec();
    if let Some(path) = config_path(argv) {
        let text = fs::read_to_string(&path).map_err(|e| {
            Cli::command().error(clap::error::ErrorKind::Io, format!("{path}: {e}"))
        })?;
        let extra = config_flags(&text)
            .map_err(|e| Cli::command().error(clap::error::ErrorKind::InvalidValue, e.to_string()))?;
        full.extend(extra);
    }
    let matches = Cli::command().args_override_self(true).try_get_matches_from(full)?;
    let cli = Cli::from_arg_matches(&matches)?;
    Ok((cli, matches))
}

/// The effective subcommand settings as `key=value` lines, accepted back by
/// `--config`.
pub fn manifest_entries(matches: &ArgMatches) -> (String, Vec<(String, String)>) {
    let Some((name, sub)) = matches.subcommand() else {
        return (String::new(), Vec::new());
    };
    let cmd = Cli::command();
    let Some(def) = cmd.find_subcommand(name) else {
        return (name.to_string(), Vec::new());
    };
    let mut out = Vec::new();
    // Argument groups from flattened structs also show up as ids; keep real
    // long options only, keyed by their flag name.
    for arg in def.get_arguments() {
        let (Some(long), id) = (arg.get_long(), arg.get_id().as_str()) else {
            continue;
        };
        if long == "config" {
            continue;
        }
        let Ok(Some(raw)) = sub.try_get_raw(id) else {
            continue;
        };
        let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        if vals.is_empty() {
            continue;
        }
        out.push((long.replace('-', "_"), vals.join(",")));
    }
    out.sort();
    (name.to_string(), out)
}
