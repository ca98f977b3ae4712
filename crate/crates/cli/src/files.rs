//! Versioned JSON documents: fitted models, test reports, interval and
//! coverage reports. Every document carries `schema`, `schema_version` and
//! the configuration that produced it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use pai_core::generators::GeneratorModel;
use pai_core::pai::{ConfidenceInterval, TestReport};
use pai_core::predict::{CoverageReport, PredictionInterval};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Context};

pub const SCHEMA_VERSION: u32 = 1;
pub const MODEL_SCHEMA: &str = "pai-model";
pub const REPORT_SCHEMA: &str = "pai-test-report";
pub const INTERVALS_SCHEMA: &str = "pai-intervals";
pub const COVERAGE_SCHEMA: &str = "pai-coverage";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema: String,
    pub schema_version: u32,
    pub config: serde_json::Value,
    pub dim: usize,
    pub model: GeneratorModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PivotalSection {
    pub estimate: f64,
    pub scale: f64,
    pub interval: ConfidenceInterval,
    /// Sorted simulated pivot values.
    pub pivot_draws: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub schema: String,
    pub schema_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub report: Option<TestReport>,
    pub pivotal: Option<PivotalSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub point: usize,
    pub method: String,
    #[serde(flatten)]
    pub interval: PredictionInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalsFile {
    pub schema: String,
    pub schema_version: u32,
    pub config: serde_json::Value,
    pub intervals: Vec<IntervalRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSummary {
    pub mean: f64,
    pub median: f64,
    pub mean_length: f64,
    pub median_length: f64,
}

impl From<&CoverageReport> for CoverageSummary {
    fn from(r: &CoverageReport) -> Self {
        CoverageSummary {
            mean: r.mean_coverage,
            median: r.median_coverage,
            mean_length: r.mean_length,
            median_length: r.median_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageFile {
    pub schema: String,
    pub schema_version: u32,
    pub config: serde_json::Value,
    pub alpha: f64,
    pub generator: String,
    pub conformal_baseline: String,
    pub pai: CoverageSummary,
    pub conformal: CoverageSummary,
    /// Fraction of test points where the PAI interval is shorter than the conformal one.
    pub pai_shorter_fraction: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    log::debug!("writing {}", path.display());
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn check_schema(path: &Path, schema: &str, version: u32, expected: &str) -> CliResult<()> {
    if schema != expected || version != SCHEMA_VERSION {
        return Err(CliError::Data(format!(
            "{}: expected schema {expected} version {SCHEMA_VERSION}, found {schema} version {version}",
            path.display()
        )));
    }
    Ok(())
}

pub fn read_model(path: &Path) -> CliResult<GeneratorModel> {
    let file: ModelFile = read_json(path)?;
    check_schema(path, &file.schema, file.schema_version, MODEL_SCHEMA)?;
    file.model.validate().context(path.display().to_string())?;
    if file.model.dim() != file.dim {
        return Err(CliError::Data(format!(
            "{}: dim {} does not match the model",
            path.display(),
            file.dim
        )));
    }
    Ok(file.model)
}

pub fn read_report(path: &Path) -> CliResult<ReportFile> {
    let file: ReportFile = read_json(path)?;
    check_schema(path, &file.schema, file.schema_version, REPORT_SCHEMA)?;
    Ok(file)
}
