//! Experiment driver: dataset simulation, single solves, method comparison,
//! runtime scaling, parameter grids and streaming reconstruction.

pub mod args;
pub mod commands;
pub mod error;
pub mod plot;
pub mod report;
pub mod runner;
pub mod stats;

use std::io::{BufRead, Write};

use args::Command;
pub use error::CliError;

/// Runs the tool on `argv` (program name first) and returns the exit code:
/// 0 on success, 2 when a solver diverged, 1 otherwise.
pub fn main_with(argv: &[String], input: impl BufRead, output: impl Write, mut err: impl Write) -> i32 {
    let (cli, matches) = match args::parse(argv) {
        Ok(v) => v,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
        }
    };
    let (_, manifest) = args::manifest_entries(&matches);
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a, &manifest),
        Command::Solve(a) => commands::solve_cmd(a, &manifest),
        Command::Compare(a) => commands::compare_cmd(a, &manifest),
        Command::Scale(a) => commands::scale_cmd(a, &manifest),
        Command::Grid(a) => commands::grid_cmd(a, &manifest),
        Command::Stream(a) => commands::stream_cmd(a, input, output, &mut err),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
