use serde::Serialize;

use crate::run::RunRecord;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregatePoint {
    pub x: f64,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
    /// Instances with a value at this `x`.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateSeries {
    pub metric: String,
    pub level: f64,
    pub points: Vec<AggregatePoint>,
    /// Share of runs (in percent) whose final policy succeeded, when known.
    pub success_percentage: Option<f64>,
}

/// Quantile of sorted data with linear interpolation between order
/// statistics at position `(n − 1) p`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `(lo, median, hi)` with `lo`/`hi` the `(1 ∓ level)/2` quantiles.
pub fn band(values: &[f64], level: f64) -> (f64, f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    (
        quantile(&v, tail),
        quantile(&v, 0.5),
        quantile(&v, 1.0 - tail),
    )
}

/// The value of `metric` at the last row whose axis value is `≤ x`.
fn value_at(run: &RunRecord, metric: &str, x: f64) -> Option<f64> {
    run.rows
        .iter()
        .take_while(|r| r.x <= x)
        .last()
        .and_then(|r| r.metric(metric))
        .filter(|v| !v.is_nan())
}

/// Pointwise median and quantile band of `metric` across runs on `grid`.
/// Grid points where no run has a value are skipped.
pub fn aggregate_ci(
    runs: &[RunRecord],
    metric: &str,
    grid: &[f64],
    level: f64,
) -> Result<AggregateSeries, HarnessError> {
    if runs.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let mut points = Vec::with_capacity(grid.len());
    for &x in grid {
        let values: Vec<f64> = runs.iter().filter_map(|r| value_at(r, metric, x)).collect();
        if values.is_empty() {
            continue;
        }
        let (lo, median, hi) = band(&values, level);
        points.push(AggregatePoint {
            x,
            median,
            lo,
            hi,
            count: values.len(),
        });
    }
    let judged: Vec<bool> = runs.iter().filter_map(|r| r.success).collect();
    let success_percentage = (!judged.is_empty())
        .then(|| 100.0 * judged.iter().filter(|s| **s).count() as f64 / judged.len() as f64);
    Ok(AggregateSeries {
        metric: metric.to_string(),
        level,
        points,
        success_percentage,
    })
}
