//! Run reports and trace files.
//!
//! Reports are JSON with a fixed key order (struct order below); the wall
//! clock is the last key so determinism checks can strip it. Traces are CSV
//! with a header row and the iteration index in column 0. Floats print via
//! the shortest round-trip formatting on both paths, so identical runs
//! produce identical bytes.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub mode: String,
    /// Echo of the run configuration (inputs, seeds, tolerances).
    pub config: serde_json::Value,
    pub status: String,
    pub outer_iterations: usize,
    pub total_inner_sweeps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_residual: Option<f64>,
    /// Spectral radius of the loaded, normalized model, when a loading was
    /// applied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_loaded: Option<f64>,
    /// Largest |x_dense - x| against a dense direct solve, when the mode
    /// cross-checks itself.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense_max_diff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<Vec<f64>>,
    /// sign(x) of the final estimate, emitted with --detect.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detected: Option<Vec<i32>>,
    /// Path of the CSV trace written alongside this report, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    pub wall_ms: u64,
}

/// Hard-decision symbol detection: non-negative maps to +1.
pub fn detect_signs(x: &[f64]) -> Vec<i32> {
    x.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect()
}

pub fn write_report(path: &Path, report: &RunReport) -> std::io::Result<()> {
    let mut body = serde_json::to_string_pretty(report).expect("report serializes");
    body.push('\n');
    fs::write(path, body)
}

pub fn print_report(report: &RunReport) {
    println!(
        "{}",
        serde_json::to_string_pretty(report).expect("report serializes")
    );
}

/// Writes a CSV trace: one header line, then the given rows.
pub fn write_csv<I>(path: &Path, header: &str, rows: I) -> std::io::Result<()>
where
    I: IntoIterator<Item = String>,
{
    let mut out = Vec::new();
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    fs::write(path, out)
}

/// Joins floats with commas using shortest round-trip formatting.
pub fn csv_floats(values: &[f64]) -> String {
    let mut row = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            row.push(',');
        }
        row.push_str(&format!("{v}"));
    }
    row
}
