use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value <= tolerance }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value >= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub seed: u64,
    pub elapsed_seconds: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig, checks: Vec<Check>, elapsed_seconds: f64) -> Self {
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        Self { config: config.clone(), checks, seed: config.master_seed, elapsed_seconds, pass, error: None }
    }

    /// Report of a run that stopped on an error.
    pub fn failed(config: &ExperimentConfig, error: &Error, elapsed_seconds: f64) -> Self {
        Self {
            config: config.clone(),
            checks: vec![],
            seed: config.master_seed,
            elapsed_seconds,
            pass: false,
            error: Some(error.to_string()),
        }
    }
}

/// A flat CSV table; cells are preformatted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self { file: file.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Formats a cell; `Display` of `f64` round-trips and is platform independent.
pub(crate) fn cell(x: impl std::fmt::Display) -> String {
    x.to_string()
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

/// Writes `report.json`, `checks.csv` and every table into `dir`.
pub fn write_outputs(dir: &Path, report: &ExperimentReport, tables: &[Table]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut checks = Table::new("checks.csv", &["name", "value", "tolerance", "pass"]);
    for c in &report.checks {
        checks.push(vec![cell(&c.name), cell(c.value), cell(c.tolerance), cell(c.pass)]);
    }
    for t in tables.iter().chain(std::iter::once(&checks)) {
        write_atomic(dir, &t.file, &t.to_csv()?)?;
    }
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    write_atomic(dir, "report.json", &json)
}
