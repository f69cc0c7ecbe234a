//! CSV tables, text files and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Plain CSV table; cells are written verbatim.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip decimal form; `inf`, `-inf` and `NaN` for the
/// non-finite values.
pub fn num(x: f64) -> String {
    x.to_string()
}

/// Free text made safe for a CSV cell.
pub fn cell(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Output directory, created on demand.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, CliError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| CliError::io(&p, e))
    }

    pub fn write_table(&self, name: &str, table: &Table) -> Result<(), CliError> {
        self.write(name, table.to_csv())
    }

    /// Writes the plot when there is one; returns whether a file was written.
    pub fn write_svg(&self, name: &str, svg: Option<String>) -> Result<bool, CliError> {
        match svg {
            Some(s) => self.write(name, s).map(|_| true),
            None => Ok(false),
        }
    }

    /// `manifest.txt`: comment lines with the version and command, then the
    /// settings as `key=value` lines.
    pub fn write_manifest(&self, command: &str, entries: &[(String, String)]) -> Result<(), CliError> {
        let mut s = format!(
            "# vpal {}\n# command: {command}\n# rerun: vpal {command} --config manifest.txt\n",
            env!("CARGO_PKG_VERSION")
        );
        for (k, v) in entries {
            s.push_str(&format!("{k}={v}\n"));
        }
        self.write("manifest.txt", s)
    }
}
