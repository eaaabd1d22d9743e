//! Serializable solve reports and result tables.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use tfc_core::desolve::SolveReport;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: not a JSON solve report: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.display().to_string(), source }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedValues {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// A [`SolveReport`] in the form written by `solve --format json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub problem: String,
    pub converged: bool,
    pub termination: String,
    pub iterations: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub max_error: Option<f64>,
    pub mean_error: Option<f64>,
    pub wall_seconds: f64,
    pub n_rows: usize,
    pub n_coefficients: usize,
    pub coefficients: Vec<NamedValues>,
    pub extras: Vec<NamedValue>,
    pub samples: Samples,
}

impl From<&SolveReport> for ReportRecord {
    fn from(r: &SolveReport) -> Self {
        ReportRecord {
            problem: r.problem.clone(),
            converged: r.converged,
            termination: r.termination.clone(),
            iterations: r.iterations,
            max_residual: r.max_residual,
            mean_residual: r.mean_residual,
            max_error: r.max_error,
            mean_error: r.mean_error,
            wall_seconds: r.wall_seconds,
            n_rows: r.n_rows,
            n_coefficients: r.n_coefficients,
            coefficients: r.xi.iter().map(|(name, values)| NamedValues { name: name.clone(), values: values.clone() }).collect(),
            extras: r.extras.iter().map(|(name, value)| NamedValue { name: name.clone(), value: *value }).collect(),
            samples: Samples { columns: r.samples.columns.clone(), rows: r.samples.rows.clone() },
        }
    }
}

impl ReportRecord {
    pub fn write_json(&self, path: &Path) -> Result<(), OutputError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|source| OutputError::Json { path: path.display().to_string(), source })?;
        std::fs::write(path, text + "\n").map_err(io_err(path))
    }

    pub fn read_json(path: &Path) -> Result<Self, OutputError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| OutputError::Json { path: path.display().to_string(), source })
    }

    /// Test-grid samples as CSV: coordinates, solution, and, when the
    /// problem has an analytic solution, the true value and absolute error.
    pub fn write_samples_csv(&self, out: impl Write) -> Result<(), OutputError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.samples.columns)?;
        for row in &self.samples.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush().map_err(|e| OutputError::Csv(e.into()))?;
        Ok(())
    }
}

/// One line of a result table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub problem: String,
    pub m: usize,
    pub n: usize,
    pub max_error: Option<f64>,
    pub mean_error: Option<f64>,
    pub max_residual: f64,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub seed: Option<u64>,
}

impl ResultRow {
    pub fn from_report(problem: &str, m: usize, n: usize, seed: Option<u64>, r: &SolveReport) -> Self {
        ResultRow {
            problem: problem.to_string(),
            m,
            n,
            max_error: r.max_error,
            mean_error: r.mean_error,
            max_residual: r.max_residual,
            iterations: r.iterations,
            wall_seconds: r.wall_seconds,
            seed,
        }
    }
}

pub fn write_table(rows: &[ResultRow], out: impl Write) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["problem", "m", "n", "max_error", "mean_error", "max_residual", "iterations", "wall_seconds", "seed"])?;
    }
    w.flush().map_err(|e| OutputError::Csv(e.into()))?;
    Ok(())
}

pub fn write_table_file(rows: &[ResultRow], path: &Path) -> Result<(), OutputError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    write_table(rows, std::io::BufWriter::new(file))
}
