use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_start, IterRow, OptError, OptRunRecord, Result, RunStatus};
use crate::linalg::{self, norm};
use crate::oracle::StochasticOracle;

/// Step size `η_t = a / (⌊t/P⌋ + b)^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub a: f64,
    pub b: f64,
    #[serde(default = "one")]
    pub period: usize,
    #[serde(default = "one_f")]
    pub exponent: f64,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

impl StepSchedule {
    pub fn new(a: f64, b: f64, period: usize, exponent: f64) -> Self {
        Self {
            a,
            b,
            period,
            exponent,
        }
    }

    pub fn constant(eta: f64) -> Self {
        Self::new(eta, 1.0, 1, 0.0)
    }

    pub fn eta(&self, t: usize) -> f64 {
        self.a / ((t / self.period) as f64 + self.b).powf(self.exponent)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) || self.period == 0 || !(self.exponent >= 0.0) {
            return Err(OptError::InvalidConfig(
                "step schedule needs a > 0, b > 0, period ≥ 1, exponent ≥ 0".into(),
            ));
        }
        Ok(())
    }

    /// `a ∈ {0.1, 0.3, 1}` × `p ∈ {0.5, 1}` with `b = 1`, `P = 1`.
    pub fn default_grid() -> Vec<StepSchedule> {
        let mut out = Vec::new();
        for a in [0.1, 0.3, 1.0] {
            for p in [0.5, 1.0] {
                out.push(StepSchedule::new(a, 1.0, 1, p));
            }
        }
        out
    }
}

/// Mini-batch SGD, `x_{t+1} = x_t − η_t ĝ_t`.
#[allow(clippy::too_many_arguments)]
pub fn sgd_run<O, R>(
    oracle: &mut O,
    schedule: &StepSchedule,
    batch: usize,
    x0: &[f64],
    max_iters: usize,
    sample_budget: Option<u64>,
    rng: &mut R,
) -> Result<OptRunRecord>
where
    O: StochasticOracle,
    R: Rng + ?Sized,
{
    schedule.validate()?;
    if batch == 0 {
        return Err(OptError::InvalidConfig("batch must be ≥ 1".into()));
    }
    check_start(oracle.dim(), x0)?;
    let clock = Instant::now();
    let base = oracle.counters();
    let mut x = x0.to_vec();
    let row = |o: &O, t: usize, x: &[f64], step: f64| IterRow {
        t,
        gap: o.gap(x),
        step_norm: step,
        grad_samples: o.counters().gradient - base.gradient,
        hess_samples: 0,
        rejected: false,
        model_value: 0.0,
        g_dot_delta: 0.0,
        elapsed_ms: clock.elapsed().as_secs_f64() * 1e3,
    };
    let mut rows = vec![row(oracle, 0, &x, 0.0)];
    let mut status = RunStatus::MaxIters;
    for t in 0..max_iters {
        if let Some(b) = sample_budget {
            if rows.last().map_or(0, |r| r.grad_samples) >= b {
                status = RunStatus::BudgetExhausted;
                break;
            }
        }
        let g = oracle.sample_gradient(&x, batch, rng);
        let eta = schedule.eta(t);
        linalg::axpy(-eta, &g, &mut x);
        if !linalg::all_finite(&x) || !oracle.gap(&x).is_finite() {
            status = RunStatus::NonFinite;
            break;
        }
        rows.push(row(oracle, t + 1, &x, eta * norm(&g)));
    }
    Ok(OptRunRecord {
        rows,
        status,
        x_final: x,
    })
}

/// Outcome of a grid search over step schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdTuning {
    pub best: StepSchedule,
    pub best_median_gap: f64,
    /// Median final gap per grid entry; diverged runs count as `+∞`.
    pub medians: Vec<(StepSchedule, f64)>,
}

/// Picks the schedule with the smallest median final gap over `seeds`.
/// Each run gets a fresh oracle from `make_oracle` and a ChaCha8 stream
/// seeded with the seed.
#[allow(clippy::too_many_arguments)]
pub fn tune_sgd<O, F>(
    make_oracle: F,
    grid: &[StepSchedule],
    batch: usize,
    x0: &[f64],
    max_iters: usize,
    sample_budget: Option<u64>,
    seeds: &[u64],
) -> Result<SgdTuning>
where
    O: StochasticOracle,
    F: Fn() -> O,
{
    if grid.is_empty() || seeds.is_empty() {
        return Err(OptError::InvalidConfig(
            "grid and seeds must be nonempty".into(),
        ));
    }
    let mut medians = Vec::with_capacity(grid.len());
    for sched in grid {
        let mut gaps = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut oracle = make_oracle();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rec = sgd_run(
                &mut oracle,
                sched,
                batch,
                x0,
                max_iters,
                sample_budget,
                &mut rng,
            )?;
            gaps.push(if rec.status == RunStatus::NonFinite {
                f64::INFINITY
            } else {
                rec.final_gap()
            });
        }
        medians.push((*sched, median(&mut gaps)));
    }
    let (best, best_median_gap) = medians
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is nonempty");
    Ok(SgdTuning {
        best,
        best_median_gap,
        medians,
    })
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
