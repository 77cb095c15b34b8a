use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::aggregate::AggregateSeries;
use crate::config::ExperimentConfig;
use crate::run::RunRecord;
use crate::HarnessError;

pub const RUNS_HEADER: [&str; 6] = [
    "instance",
    "step",
    "oracle_calls_grad",
    "oracle_calls_hess",
    "metric_name",
    "metric_value",
];
pub const AGGREGATE_HEADER: [&str; 4] = ["x", "median", "lo", "hi"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub version: String,
    /// Seconds since the Unix epoch when the files were written.
    pub written_at_unix_s: u64,
    pub wall_clock_ms: f64,
    pub instances_completed: usize,
    pub failures: Vec<(usize, String)>,
    pub metric: String,
    pub success_percentage: Option<f64>,
}

/// Scientific notation with 17 significant digits; parses back to the same
/// `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `runs.csv`, `aggregate.csv` and `manifest.json` into `dir`.
#[allow(clippy::too_many_arguments)]
pub fn emit(
    dir: &Path,
    config: &ExperimentConfig,
    records: &[RunRecord],
    series: Option<&AggregateSeries>,
    failures: &[(usize, String)],
    metric: &str,
    wall_clock_ms: f64,
) -> Result<Manifest, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let path = dir.join("runs.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(RUNS_HEADER)?;
    for rec in records {
        for row in &rec.rows {
            for (name, value) in &row.metrics {
                w.write_record([
                    rec.instance.to_string(),
                    row.step.to_string(),
                    row.calls_grad.to_string(),
                    row.calls_hess.to_string(),
                    name.to_string(),
                    format_float(*value),
                ])?;
            }
        }
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join("aggregate.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for p in series.map_or(&[][..], |s| &s.points) {
        w.write_record([p.x, p.median, p.lo, p.hi].map(format_float))?;
    }
    w.flush().map_err(io_err(&path))?;

    let manifest = Manifest {
        config: config.clone(),
        seeds: config.seeds(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        written_at_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        wall_clock_ms,
        instances_completed: records.len(),
        failures: failures.to_vec(),
        metric: metric.to_string(),
        success_percentage: series.and_then(|s| s.success_percentage),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}
