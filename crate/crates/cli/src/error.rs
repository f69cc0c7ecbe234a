use std::io;
use std::path::PathBuf;

use thiserror::Error;
use vpal::linalg::io::FormatError;
use vpal::metrics::MetricError;
use vpal::model::ModelError;
use vpal::sim::SimError;
use vpal::solvers::SolverError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("solver diverged: {0}")]
    Diverged(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for divergence, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Diverged(_) => 2,
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Diverged("fista".into()).exit_code(), 2);
        assert_eq!(CliError::Usage("bad".into()).exit_code(), 1);
        let e = CliError::io("/x", io::Error::new(io::ErrorKind::NotFound, "gone"));
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().starts_with("/x"));
    }
}
