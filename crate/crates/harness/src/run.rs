use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scrn_core::optimizers::{crn_run, scrn_run, sgd_run, vr_scrn_run, OptRunRecord};
use scrn_core::rl::{
    evaluate_policy, isvr_scrn_rl_run, scrn_rl_run, spg_run, RlRunRecord, SoftmaxPolicy,
};
use serde::Serialize;

use crate::aggregate::{aggregate_ci, AggregateSeries};
use crate::config::{
    ExperimentConfig, RlAlgorithm, RlExperiment, SyntheticAlgorithm, SyntheticExperiment,
};
use crate::HarnessError;

/// Cumulative counts and metrics after one optimizer iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub step: usize,
    /// Synthetic: gradient samples. RL: observed state-action pairs.
    pub calls_grad: u64,
    /// Synthetic: Hessian samples. RL: episodes.
    pub calls_hess: u64,
    /// Aggregation axis: total oracle samples, or state-action pairs.
    pub x: f64,
    pub metrics: Vec<(&'static str, f64)>,
}

impl RunRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub instance: usize,
    pub seed: u64,
    pub status: String,
    pub rows: Vec<RunRow>,
    /// RL only: the final policy reaches the goal in most evaluation episodes.
    pub success: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    /// `(instance, message)` of runs that returned an error.
    pub failures: Vec<(usize, String)>,
    pub series: Option<AggregateSeries>,
    pub wall_clock_ms: f64,
}

/// The metric aggregated across instances.
pub fn headline_metric(config: &ExperimentConfig) -> &'static str {
    match config {
        ExperimentConfig::Synthetic(_) => "gap",
        ExperimentConfig::Rl(_) => "mean_return",
    }
}

/// Runs every instance (on a small thread pool), then aggregates the
/// headline metric on an even grid over `[0, x_max]`. Failed instances are
/// reported in `failures`; the others are kept.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    let clock = Instant::now();
    let seeds = config.seeds();
    let results: Mutex<Vec<(usize, Result<RunRecord, String>)>> = Mutex::new(Vec::new());
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(seeds.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let out = run_instance(config, i, seeds[i]);
                results.lock().expect("no worker panicked").push((i, out));
            });
        }
    });
    let mut results = results.into_inner().expect("no worker panicked");
    results.sort_by_key(|(i, _)| *i);
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(msg) => failures.push((i, msg)),
        }
    }
    let series = if records.is_empty() {
        None
    } else {
        let grid = grid(config, &records);
        Some(aggregate_ci(
            &records,
            headline_metric(config),
            &grid,
            0.90,
        )?)
    };
    Ok(ExperimentOutput {
        records,
        failures,
        series,
        wall_clock_ms: clock.elapsed().as_secs_f64() * 1e3,
    })
}

fn grid(config: &ExperimentConfig, records: &[RunRecord]) -> Vec<f64> {
    let run = config.run_settings();
    let last = records
        .iter()
        .filter_map(|r| r.rows.last().map(|row| row.x))
        .fold(0.0, f64::max);
    let x_max = match config {
        ExperimentConfig::Synthetic(_) => last.min(run.budget as f64),
        ExperimentConfig::Rl(_) => last,
    };
    let n = run.grid_points;
    (0..=n).map(|k| x_max * k as f64 / n as f64).collect()
}

fn run_instance(
    config: &ExperimentConfig,
    instance: usize,
    seed: u64,
) -> Result<RunRecord, String> {
    match config {
        ExperimentConfig::Synthetic(e) => run_synthetic(e, instance, seed),
        ExperimentConfig::Rl(e) => run_rl(e, instance, seed),
    }
}

fn run_synthetic(e: &SyntheticExperiment, instance: usize, seed: u64) -> Result<RunRecord, String> {
    let mut oracle = e.problem.build().map_err(|err| err.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = e.start();
    let budget = Some(e.run.budget);
    let exact = matches!(e.algorithm, SyntheticAlgorithm::Crn(_));
    let rec: OptRunRecord = match &e.algorithm {
        SyntheticAlgorithm::Scrn(c) => {
            let mut c = *c;
            c.sample_budget = budget;
            scrn_run(&mut oracle, &c, &x0, &mut rng)
        }
        SyntheticAlgorithm::Crn(c) => crn_run(&mut oracle, c, &x0, &mut rng),
        SyntheticAlgorithm::VrScrn(c) => {
            let mut c = *c;
            c.base.sample_budget = budget;
            vr_scrn_run(&mut oracle, &c, &x0, &mut rng)
        }
        SyntheticAlgorithm::Sgd(s) => sgd_run(
            &mut oracle,
            &s.schedule,
            s.batch,
            &x0,
            s.max_iters,
            budget,
            &mut rng,
        ),
    }
    .map_err(|err| err.to_string())?;
    let rows = rec
        .rows
        .iter()
        .map(|r| {
            // exact derivatives: one gradient and one Hessian evaluation per step
            let (g, h) = if exact {
                (r.t as u64, r.t as u64)
            } else {
                (r.grad_samples, r.hess_samples)
            };
            RunRow {
                step: r.t,
                calls_grad: g,
                calls_hess: h,
                x: (g + h) as f64,
                metrics: vec![("gap", r.gap), ("step_norm", r.step_norm)],
            }
        })
        .collect();
    Ok(RunRecord {
        instance,
        seed,
        status: format!("{:?}", rec.status),
        rows,
        success: None,
    })
}

fn run_rl(e: &RlExperiment, instance: usize, seed: u64) -> Result<RunRecord, String> {
    let mdp = e.env.build(seed).map_err(|err| err.to_string())?;
    let p0 = SoftmaxPolicy::uniform(mdp.n_states(), mdp.n_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = Some(e.run.budget);
    let rec: RlRunRecord = match &e.algorithm {
        RlAlgorithm::Scrn(c) => {
            let mut c = *c;
            c.sample_budget = budget;
            scrn_rl_run(&mdp, &p0, &c, &mut rng)
        }
        RlAlgorithm::IsvrScrn(c) => {
            let mut c = *c;
            c.base.sample_budget = budget;
            isvr_scrn_rl_run(&mdp, &p0, &c, &mut rng)
        }
        RlAlgorithm::Spg(c) => {
            let mut c = *c;
            c.episode_budget = budget;
            spg_run(&mdp, &p0, &c, &mut rng)
        }
    }
    .map_err(|err| err.to_string())?;
    let policy = rec.policy(mdp.n_states(), mdp.n_actions());
    let eval =
        evaluate_policy(&mdp, &policy, e.eval_episodes, &mut rng).map_err(|err| err.to_string())?;
    let rows = rec
        .rows
        .iter()
        .map(|r| RunRow {
            step: r.iter,
            calls_grad: r.state_action_pairs,
            calls_hess: r.episodes,
            x: r.state_action_pairs as f64,
            metrics: vec![
                ("mean_return", r.mean_return),
                ("mean_length", r.mean_length),
                ("success_rate", r.success_rate),
                ("step_norm", r.step_norm),
            ],
        })
        .collect();
    Ok(RunRecord {
        instance,
        seed,
        status: format!("{:?}", rec.status),
        rows,
        success: Some(eval.success_rate > 0.5),
    })
}
