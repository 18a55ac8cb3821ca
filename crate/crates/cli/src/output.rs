//! JSON documents written by the commands. Field names are part of the
//! shipped schemas in `schemas/`.

use std::path::Path;

use dfshift::{LambdaBreakdown, OneBodyMatrix, OptimizationConfig, StopReason};
use serde::{Deserialize, Serialize};

use crate::error::{io_error, CliError};

pub const SCHEMA_VERSION: u32 = 1;
pub const ARCHIVE_FILE: &str = "factors.dfsf";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.jsonl";

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub lambda: f64,
    pub err: f64,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub manifest: &'static str,
    pub input_sha256: String,
    pub integral_convention: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub lambda_df: f64,
    pub err: f64,
    pub per_factor: Vec<f64>,
    pub runs: Vec<RunRow>,
}

#[derive(Debug, Serialize)]
pub struct OptimizeReport {
    pub schema_version: u32,
    pub manifest: &'static str,
    pub input_sha256: String,
    pub integral_convention: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub n_electrons: usize,
    pub kappa: f64,
    pub xi: OneBodyMatrix,
    pub lambda_breakdown: LambdaBreakdown,
    pub err_final: f64,
    pub lambda_init: f64,
    pub err_init: f64,
    pub err_budget: f64,
    pub feasible: bool,
    pub c_approx: f64,
    pub iterations_run: usize,
    pub best_iter: usize,
    pub stop_reason: StopReason,
    pub runs: Vec<RunRow>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: &'static str,
    pub input_path: String,
    pub input_checksum: String,
    #[serde(rename = "R")]
    pub r: usize,
    pub config: Option<OptimizationConfig>,
    pub archive: String,
    pub archive_data_sha256: String,
    pub tool_version: &'static str,
    pub platform: String,
    pub started_unix: f64,
    pub finished_unix: f64,
}

/// The part of a summary or report that `report` reads.
#[derive(Debug, Deserialize)]
pub struct RunTable {
    pub runs: Vec<RunRow>,
}

pub fn platform() -> String {
    format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}
