//! Optimizers over a [`StochasticOracle`](crate::oracle::StochasticOracle):
//! stochastic cubic regularized Newton ([`scrn_run`]), its deterministic
//! counterpart ([`crn_run`]), the variance-reduced variant ([`vr_scrn_run`])
//! and an SGD baseline ([`sgd_run`]).

mod scrn;
mod sgd;
mod theory;
mod vr;

pub use scrn::{crn_run, scrn_run};
pub use sgd::{sgd_run, tune_sgd, SgdTuning, StepSchedule};
pub use theory::{default_penalty, scrn_batch_sizes, scrn_batch_targets, RecursionConstants};
pub use vr::{vr_batch_sizes, vr_scrn_run, VrBatchRule, VrScrnConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cubic::{self, CubicError, CubicModel, CubicSolution, GdOptions};
use crate::linalg::SymMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("starting point has dimension {got}, oracle expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("missing problem constant: {0}")]
    MissingConstant(&'static str),
    #[error(transparent)]
    Subproblem(#[from] CubicError),
}

pub type Result<T> = std::result::Result<T, OptError>;

/// Sub-problem solver choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Subsolver {
    /// Exact solver on the coordinates that interact with the model.
    Exact {
        #[serde(default = "default_dim_cap")]
        dim_cap: usize,
    },
    Gd {
        tol: f64,
        max_iters: usize,
        #[serde(default)]
        perturb: bool,
    },
}

fn default_dim_cap() -> usize {
    cubic::DEFAULT_EXACT_DIM_CAP
}

impl Default for Subsolver {
    fn default() -> Self {
        Subsolver::Exact {
            dim_cap: cubic::DEFAULT_EXACT_DIM_CAP,
        }
    }
}

impl Subsolver {
    pub fn solve<R: Rng + ?Sized>(
        &self,
        g: Vec<f64>,
        h: SymMatrix,
        m_penalty: f64,
        rng: &mut R,
    ) -> Result<CubicSolution> {
        let model = CubicModel::new(g, h, m_penalty)?;
        let sol = match *self {
            Subsolver::Exact { dim_cap } => cubic::solve_exact_reduced(&model, dim_cap)?,
            Subsolver::Gd {
                tol,
                max_iters,
                perturb,
            } => cubic::solve_gd(
                &model,
                &GdOptions {
                    tol,
                    max_iters,
                    perturb,
                },
                rng,
            )?,
        };
        Ok(sol)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Subsolver::Exact { dim_cap: 0 } => Err(OptError::InvalidConfig(
                "subsolver.dim_cap must be ≥ 1".into(),
            )),
            Subsolver::Gd { tol, max_iters, .. } if !(tol > 0.0) || max_iters == 0 => Err(
                OptError::InvalidConfig("subsolver.tol must be > 0 and max_iters ≥ 1".into()),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScrnConfig {
    pub m_penalty: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Iteration cap `T`.
    pub max_iters: usize,
    pub n1: usize,
    pub n2: usize,
    #[serde(default)]
    pub subsolver: Subsolver,
    /// Stop once `‖Δ‖ < ε^{1/(2α)}`.
    #[serde(default)]
    pub stop_on_small_step: bool,
    /// Steps longer than this are discarded (their samples still count).
    #[serde(default)]
    pub delta_reject_threshold: Option<f64>,
    /// Stop before an iteration once this many samples have been drawn.
    #[serde(default)]
    pub sample_budget: Option<u64>,
}

impl ScrnConfig {
    pub fn new(m_penalty: f64, n1: usize, n2: usize, max_iters: usize) -> Self {
        Self {
            m_penalty,
            alpha: 1.0,
            epsilon: 1e-6,
            max_iters,
            n1,
            n2,
            subsolver: Subsolver::default(),
            stop_on_small_step: false,
            delta_reject_threshold: None,
            sample_budget: None,
        }
    }

    pub fn stop_threshold(&self) -> f64 {
        self.epsilon.powf(1.0 / (2.0 * self.alpha))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(OptError::InvalidConfig(msg.to_string()));
        if !(self.m_penalty > 0.0 && self.m_penalty.is_finite()) {
            return bad("m_penalty must be positive");
        }
        if !(1.0..=2.0).contains(&self.alpha) {
            return bad("alpha must lie in [1, 2]");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.max_iters == 0 || self.n1 == 0 || self.n2 == 0 {
            return bad("max_iters, n1 and n2 must be ≥ 1");
        }
        if let Some(t) = self.delta_reject_threshold {
            if !(t > 0.0) {
                return bad("delta_reject_threshold must be positive");
            }
        }
        if self.sample_budget == Some(0) {
            return bad("sample_budget must be ≥ 1");
        }
        self.subsolver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    SmallStep,
    MaxIters,
    BudgetExhausted,
    NonFinite,
}

/// State after iteration `t` (row `t = 0` is the starting point).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterRow {
    pub t: usize,
    pub gap: f64,
    pub step_norm: f64,
    pub grad_samples: u64,
    pub hess_samples: u64,
    /// The step was computed but not applied.
    pub rejected: bool,
    pub model_value: f64,
    /// `gᵀΔ` of the sub-problem.
    pub g_dot_delta: f64,
    pub elapsed_ms: f64,
}

impl PartialEq for IterRow {
    fn eq(&self, o: &Self) -> bool {
        self.t == o.t
            && self.gap.to_bits() == o.gap.to_bits()
            && self.step_norm.to_bits() == o.step_norm.to_bits()
            && self.grad_samples == o.grad_samples
            && self.hess_samples == o.hess_samples
            && self.rejected == o.rejected
            && self.model_value.to_bits() == o.model_value.to_bits()
            && self.g_dot_delta.to_bits() == o.g_dot_delta.to_bits()
    }
}

impl IterRow {
    pub fn total_samples(&self) -> u64 {
        self.grad_samples + self.hess_samples
    }
}

/// Trace of one optimizer run. Equality ignores wall-clock fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptRunRecord {
    pub rows: Vec<IterRow>,
    pub status: RunStatus,
    pub x_final: Vec<f64>,
}

impl OptRunRecord {
    pub fn final_gap(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.gap)
    }

    pub fn total_samples(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.total_samples())
    }

    pub fn total_grad_samples(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.grad_samples)
    }

    /// Gap of the last row whose cumulative sample count is within `budget`.
    pub fn gap_at_budget(&self, budget: u64) -> f64 {
        self.rows
            .iter()
            .take_while(|r| r.total_samples() <= budget)
            .last()
            .map_or(f64::NAN, |r| r.gap)
    }
}

pub(crate) fn check_start(dim: usize, x0: &[f64]) -> Result<()> {
    if x0.len() != dim {
        return Err(OptError::DimMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    if !crate::linalg::all_finite(x0) {
        return Err(OptError::InvalidConfig("x0 must be finite".into()));
    }
    Ok(())
}
