//! Experiment configuration files (TOML).
//!
//! ```toml
//! kind = "synthetic"
//! instances = 20
//! budget = 100000
//! x0 = [1.0]
//!
//! [problem]
//! family = "power"
//! p = 4
//! q = 1
//! noise_sigma_grad = 0.1
//! noise_sigma_hess = 0.1
//!
//! [algorithm]
//! id = "scrn"
//! m_penalty = 58.0
//! alpha = 1.0
//! epsilon = 1e-6
//! max_iters = 100000
//! n1 = 500
//! n2 = 50
//! ```

use std::path::Path;

use scrn_core::optimizers::{ScrnConfig, StepSchedule, VrScrnConfig};
use scrn_core::oracle::SyntheticSpec;
use scrn_core::rl::{
    build_cliff_walking, build_grid_mdp, build_random_maze, GridLayout, GridRewards, IsvrConfig,
    MazeKind, SpgConfig, TabularMdp, GRID_DISCOUNT,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Synthetic(SyntheticExperiment),
    Rl(RlExperiment),
}

fn default_grid_points() -> usize {
    50
}

fn default_eval_episodes() -> usize {
    100
}

/// Settings shared by both experiment kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    /// Independent seeded runs.
    pub instances: usize,
    /// Per-run cap on stochastic oracle samples (synthetic) or episodes (RL).
    pub budget: u64,
    /// Instance `i` uses seed `seed + i`.
    #[serde(default)]
    pub seed: u64,
    /// Points of the common x-axis grid used for aggregation.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticExperiment {
    #[serde(flatten)]
    pub run: RunSettings,
    pub problem: SyntheticSpec,
    /// Starting point; a single value is broadcast to every coordinate.
    pub x0: Vec<f64>,
    pub algorithm: SyntheticAlgorithm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum SyntheticAlgorithm {
    Scrn(ScrnConfig),
    /// Exact derivatives; the iteration cap bounds the run.
    Crn(ScrnConfig),
    VrScrn(VrScrnConfig),
    Sgd(SgdSettings),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdSettings {
    pub schedule: StepSchedule,
    pub batch: usize,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlExperiment {
    #[serde(flatten)]
    pub run: RunSettings,
    pub env: EnvSpec,
    /// Episodes used to judge each final policy.
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    pub algorithm: RlAlgorithm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EnvSpec {
    CliffWalking,
    /// A fresh maze per instance unless `layout_seed` pins one.
    RandomMaze {
        #[serde(default = "default_maze_kind")]
        kind: MazeKind,
        #[serde(default)]
        layout_seed: Option<u64>,
    },
    /// ASCII layout: `#` block, `S` start, `G` goal, `C` cliff, `.` free.
    Grid {
        layout: String,
        rewards: GridRewards,
        #[serde(default = "default_discount")]
        discount: f64,
        horizon: usize,
    },
}

fn default_maze_kind() -> MazeKind {
    MazeKind::RandomMaze
}

fn default_discount() -> f64 {
    GRID_DISCOUNT
}

impl EnvSpec {
    /// The environment of the instance with seed `seed`.
    pub fn build(&self, seed: u64) -> Result<TabularMdp, scrn_core::rl::RlError> {
        match self {
            EnvSpec::CliffWalking => Ok(build_cliff_walking()),
            EnvSpec::RandomMaze { kind, layout_seed } => {
                build_random_maze(*kind, layout_seed.unwrap_or(seed))
            }
            EnvSpec::Grid {
                layout,
                rewards,
                discount,
                horizon,
            } => {
                let layout: GridLayout = layout.parse()?;
                build_grid_mdp(&layout, rewards, *discount, *horizon)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum RlAlgorithm {
    Scrn(ScrnConfig),
    IsvrScrn(IsvrConfig),
    /// Vanilla policy gradient or REINFORCE, selected by `variant`.
    Spg(SpgConfig),
}

/// One line per algorithm id, for `--list-algorithms`.
pub const ALGORITHMS: &[(&str, &str, &str)] = &[
    ("synthetic", "scrn", "stochastic cubic regularized Newton"),
    (
        "synthetic",
        "crn",
        "cubic regularized Newton with exact derivatives",
    ),
    (
        "synthetic",
        "vr_scrn",
        "variance-reduced SCRN with checkpoint period",
    ),
    ("synthetic", "sgd", "SGD with step a/(floor(t/P)+b)^p"),
    ("rl", "scrn", "SCRN on the truncated return"),
    (
        "rl",
        "isvr_scrn",
        "importance-sampled variance-reduced SCRN",
    ),
    (
        "rl",
        "spg",
        "policy gradient; variant = \"spg\" | \"reinforce\", optional entropy_coef",
    ),
];

impl ExperimentConfig {
    pub fn run_settings(&self) -> &RunSettings {
        match self {
            ExperimentConfig::Synthetic(e) => &e.run,
            ExperimentConfig::Rl(e) => &e.run,
        }
    }

    pub fn run_settings_mut(&mut self) -> &mut RunSettings {
        match self {
            ExperimentConfig::Synthetic(e) => &mut e.run,
            ExperimentConfig::Rl(e) => &mut e.run,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Synthetic(_) => "synthetic",
            ExperimentConfig::Rl(_) => "rl",
        }
    }

    /// Seeds of all instances, in order.
    pub fn seeds(&self) -> Vec<u64> {
        let run = self.run_settings();
        (0..run.instances as u64)
            .map(|i| run.seed.wrapping_add(i))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let run = self.run_settings();
        if run.instances == 0 {
            return Err(ConfigError::new("instances", "must be ≥ 1"));
        }
        if run.budget == 0 {
            return Err(ConfigError::new("budget", "must be ≥ 1"));
        }
        if run.grid_points == 0 {
            return Err(ConfigError::new("grid_points", "must be ≥ 1"));
        }
        match self {
            ExperimentConfig::Synthetic(e) => e.validate(),
            ExperimentConfig::Rl(e) => e.validate(),
        }
    }
}

impl SyntheticExperiment {
    /// `x0` expanded to the problem dimension.
    pub fn start(&self) -> Vec<f64> {
        if self.x0.len() == 1 {
            vec![self.x0[0]; self.problem.dim]
        } else {
            self.x0.clone()
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.problem
            .validate()
            .map_err(|e| ConfigError::new("problem", e.to_string()))?;
        if self.x0.len() != 1 && self.x0.len() != self.problem.dim {
            return Err(ConfigError::new(
                "x0",
                format!(
                    "needs 1 or {} entries, got {}",
                    self.problem.dim,
                    self.x0.len()
                ),
            ));
        }
        if !self.x0.iter().all(|v| v.is_finite()) {
            return Err(ConfigError::new("x0", "entries must be finite"));
        }
        let algo =
            |e: scrn_core::optimizers::OptError| ConfigError::new("algorithm", e.to_string());
        match &self.algorithm {
            SyntheticAlgorithm::Scrn(c) | SyntheticAlgorithm::Crn(c) => c.validate().map_err(algo),
            SyntheticAlgorithm::VrScrn(c) => c.validate().map_err(algo),
            SyntheticAlgorithm::Sgd(SgdSettings {
                schedule, batch, ..
            }) => {
                schedule.validate().map_err(algo)?;
                if *batch == 0 {
                    return Err(ConfigError::new("algorithm.batch", "must be ≥ 1"));
                }
                Ok(())
            }
        }
    }
}

impl RlExperiment {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.eval_episodes == 0 {
            return Err(ConfigError::new("eval_episodes", "must be ≥ 1"));
        }
        self.env
            .build(self.run.seed)
            .map_err(|e| ConfigError::new("env", e.to_string()))?;
        let algo =
            |e: scrn_core::optimizers::OptError| ConfigError::new("algorithm", e.to_string());
        match &self.algorithm {
            RlAlgorithm::Scrn(c) => c.validate().map_err(algo),
            RlAlgorithm::IsvrScrn(c) => {
                c.base.validate().map_err(algo)?;
                if c.period == 0 || c.inner_grad_batch == 0 || c.inner_hess_batch == 0 {
                    return Err(ConfigError::new(
                        "algorithm",
                        "period and inner batches must be ≥ 1",
                    ));
                }
                Ok(())
            }
            RlAlgorithm::Spg(c) => {
                c.schedule.validate().map_err(algo)?;
                if c.batch == 0 {
                    return Err(ConfigError::new("algorithm.batch", "must be ≥ 1"));
                }
                if c.entropy_coef.is_nan() || c.entropy_coef < 0.0 {
                    return Err(ConfigError::new("algorithm.entropy_coef", "must be ≥ 0"));
                }
                Ok(())
            }
        }
    }
}

/// Parses and validates a configuration.
///
/// Each section is deserialized into its concrete type separately, so that
/// errors carry the full field path even below tagged enums.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::new("", e.to_string()))?;
    let kind = take::<String>(&mut table, "", "kind")?;
    let config = match kind.as_str() {
        "synthetic" => {
            check_keys(&table, "", &["problem", "x0", "algorithm"])?;
            let problem = take(&mut table, "", "problem")?;
            let x0 = take(&mut table, "", "x0")?;
            let algorithm = take_table(&mut table, "", "algorithm")?;
            let run = section(Value::Table(table), "")?;
            ExperimentConfig::Synthetic(SyntheticExperiment {
                run,
                problem,
                x0,
                algorithm: synthetic_algorithm(algorithm)?,
            })
        }
        "rl" => {
            check_keys(&table, "", &["env", "eval_episodes", "algorithm"])?;
            let env = take(&mut table, "", "env")?;
            let eval_episodes = match table.remove("eval_episodes") {
                Some(v) => section(v, "eval_episodes")?,
                None => default_eval_episodes(),
            };
            let algorithm = take_table(&mut table, "", "algorithm")?;
            let run = section(Value::Table(table), "")?;
            ExperimentConfig::Rl(RlExperiment {
                run,
                env,
                eval_episodes,
                algorithm: rl_algorithm(algorithm)?,
            })
        }
        other => {
            return Err(ConfigError::new(
                "kind",
                format!("unknown kind `{other}`, expected `synthetic` or `rl`"),
            ))
        }
    };
    config.validate()?;
    Ok(config)
}

const RUN_KEYS: [&str; 4] = ["instances", "budget", "seed", "grid_points"];

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn check_keys(table: &Table, prefix: &str, extra: &[&str]) -> Result<(), ConfigError> {
    for key in table.keys() {
        if key != "kind" && !RUN_KEYS.contains(&key.as_str()) && !extra.contains(&key.as_str()) {
            return Err(ConfigError::new(join(prefix, key), "unknown field"));
        }
    }
    Ok(())
}

fn section<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner.as_str()) {
            (_, ".") => prefix.to_string(),
            (true, _) => inner,
            (false, _) => format!("{prefix}.{inner}"),
        };
        ConfigError::new(path, e.into_inner().to_string())
    })
}

fn take<T: DeserializeOwned>(table: &mut Table, prefix: &str, key: &str) -> Result<T, ConfigError> {
    let path = join(prefix, key);
    let value = table
        .remove(key)
        .ok_or_else(|| ConfigError::new(path.as_str(), "missing field"))?;
    section(value, &path)
}

fn take_table(table: &mut Table, prefix: &str, key: &str) -> Result<Table, ConfigError> {
    match table.remove(key) {
        Some(Value::Table(t)) => Ok(t),
        Some(_) => Err(ConfigError::new(join(prefix, key), "expected a table")),
        None => Err(ConfigError::new(join(prefix, key), "missing field")),
    }
}

fn unknown_id(id: &str, kind: &str) -> ConfigError {
    let known: Vec<&str> = ALGORITHMS
        .iter()
        .filter(|(k, _, _)| *k == kind)
        .map(|(_, id, _)| *id)
        .collect();
    ConfigError::new(
        "algorithm.id",
        format!(
            "unknown algorithm `{id}`, expected one of {}",
            known.join(", ")
        ),
    )
}

fn synthetic_algorithm(mut table: Table) -> Result<SyntheticAlgorithm, ConfigError> {
    let id = take::<String>(&mut table, "algorithm", "id")?;
    let body = Value::Table(table);
    Ok(match id.as_str() {
        "scrn" => SyntheticAlgorithm::Scrn(section(body, "algorithm")?),
        "crn" => SyntheticAlgorithm::Crn(section(body, "algorithm")?),
        "vr_scrn" => SyntheticAlgorithm::VrScrn(section(body, "algorithm")?),
        "sgd" => SyntheticAlgorithm::Sgd(section(body, "algorithm")?),
        other => return Err(unknown_id(other, "synthetic")),
    })
}

fn rl_algorithm(mut table: Table) -> Result<RlAlgorithm, ConfigError> {
    let id = take::<String>(&mut table, "algorithm", "id")?;
    let body = Value::Table(table);
    Ok(match id.as_str() {
        "scrn" => RlAlgorithm::Scrn(section(body, "algorithm")?),
        "isvr_scrn" => RlAlgorithm::IsvrScrn(section(body, "algorithm")?),
        "spg" => RlAlgorithm::Spg(section(body, "algorithm")?),
        other => return Err(unknown_id(other, "rl")),
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}
