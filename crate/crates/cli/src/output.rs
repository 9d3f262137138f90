//! Run-directory files. CSVs open with a `# config_hash=<hex>` line followed
//! by the header; floats use 17 significant digits so doubles round-trip.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const OBSERVABLES_FILE: &str = "observables.csv";
pub const CONSERVATION_FILE: &str = "conservation.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const TAIL_FILE: &str = "tail.csv";
pub const SCATTER_FILE: &str = "scatter.json";
pub const U_PLUS_FILE: &str = "u_plus.nlsf";
pub const DUHAMEL_FILE: &str = "duhamel.json";
pub const RATE_REPORT_FILE: &str = "rate_report.json";

pub fn snapshot_name(index: usize) -> String {
    format!("snap_{index:06}.nlsf")
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A numeric table with its config hash.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub config_hash: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(config_hash: &str, header: &[&str]) -> Self {
        Table {
            config_hash: config_hash.to_owned(),
            header: header.iter().map(|s| (*s).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// `(first column, named column)` pairs.
    pub fn series(&self, name: &str) -> Option<Vec<(f64, f64)>> {
        let ys = self.column(name)?;
        Some(self.rows.iter().map(|r| r[0]).zip(ys).collect())
    }

    pub fn render(&self) -> String {
        let mut out = format!("# config_hash={}\n{}\n", self.config_hash, self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| format_float(x)).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let bad = |line: usize, msg: String| CliError::format(origin, format!("line {line}: {msg}"));
        let mut lines = text.lines();
        let hash = lines
            .next()
            .and_then(|l| l.strip_prefix("# config_hash="))
            .ok_or_else(|| bad(1, "missing `# config_hash=` line".into()))?;
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| bad(2, "missing header".into()))?
            .split(',')
            .map(str::to_owned)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| bad(i + 3, format!("{c:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != header.len() {
                return Err(bad(i + 3, format!("{} cells, header has {}", row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Table {
            config_hash: hash.to_owned(),
            header,
            rows,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(CliError::io(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        Table::parse(&text, path)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
}
