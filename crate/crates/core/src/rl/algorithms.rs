use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::estimators::{
    entropy_gradient, estimate_correction, estimate_from_pool, sample_trajectory, ScoreWeighting,
    Trajectory,
};
use super::mdp::TabularMdp;
use super::policy::SoftmaxPolicy;
use super::{Result, RlError};
use crate::linalg::{self, SymMatrix};
use crate::optimizers::{RunStatus, ScrnConfig, StepSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PgVariant {
    /// Reward-to-go weighting.
    Spg,
    /// Full-return weighting.
    Reinforce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpgConfig {
    /// `η = a / (⌊e/P⌋ + b)^p` where `e` counts episodes drawn so far.
    pub schedule: StepSchedule,
    pub batch: usize,
    pub iters: usize,
    #[serde(default)]
    pub entropy_coef: f64,
    pub variant: PgVariant,
    #[serde(default)]
    pub episode_budget: Option<u64>,
}

/// One optimizer iteration, summarised over its training episodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RlIterRow {
    pub iter: usize,
    /// Cumulative episodes.
    pub episodes: u64,
    /// Cumulative observed state-action pairs.
    pub state_action_pairs: u64,
    /// Mean undiscounted return of this iteration's episodes.
    pub mean_return: f64,
    pub mean_length: f64,
    pub success_rate: f64,
    pub step_norm: f64,
    pub rejected: bool,
    pub elapsed_ms: f64,
}

impl PartialEq for RlIterRow {
    fn eq(&self, o: &Self) -> bool {
        self.iter == o.iter
            && self.episodes == o.episodes
            && self.state_action_pairs == o.state_action_pairs
            && self.mean_return.to_bits() == o.mean_return.to_bits()
            && self.mean_length.to_bits() == o.mean_length.to_bits()
            && self.success_rate.to_bits() == o.success_rate.to_bits()
            && self.step_norm.to_bits() == o.step_norm.to_bits()
            && self.rejected == o.rejected
    }
}

/// Equality ignores wall-clock fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlRunRecord {
    pub rows: Vec<RlIterRow>,
    pub status: RunStatus,
    pub theta_final: Vec<f64>,
}

impl RlRunRecord {
    pub fn policy(&self, n_states: usize, n_actions: usize) -> SoftmaxPolicy {
        SoftmaxPolicy::from_theta(n_states, n_actions, self.theta_final.clone())
            .expect("record matches the MDP shape")
    }

    pub fn episodes(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.episodes)
    }
}

struct Tracker {
    clock: Instant,
    episodes: u64,
    pairs: u64,
    rows: Vec<RlIterRow>,
}

impl Tracker {
    fn new() -> Self {
        Self {
            clock: Instant::now(),
            episodes: 0,
            pairs: 0,
            rows: Vec::new(),
        }
    }

    fn budget_spent(&self, budget: Option<u64>) -> bool {
        budget.is_some_and(|b| self.episodes >= b)
    }

    fn record(&mut self, iter: usize, pool: &[Trajectory], step_norm: f64, rejected: bool) {
        let n = pool.len().max(1) as f64;
        self.episodes += pool.len() as u64;
        self.pairs += pool.iter().map(|t| t.len() as u64).sum::<u64>();
        self.rows.push(RlIterRow {
            iter,
            episodes: self.episodes,
            state_action_pairs: self.pairs,
            mean_return: pool.iter().map(Trajectory::total_reward).sum::<f64>() / n,
            mean_length: pool.iter().map(|t| t.len() as f64).sum::<f64>() / n,
            success_rate: pool.iter().filter(|t| t.reached_goal).count() as f64 / n,
            step_norm,
            rejected,
            elapsed_ms: self.clock.elapsed().as_secs_f64() * 1e3,
        });
    }
}

fn check_policy(mdp: &TabularMdp, policy: &SoftmaxPolicy) -> Result<()> {
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(RlError::ParamDim {
            expected: mdp.param_dim(),
            got: policy.dim(),
        });
    }
    Ok(())
}

fn sample_pool<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &SoftmaxPolicy,
    n: usize,
    rng: &mut R,
) -> Vec<Trajectory> {
    (0..n)
        .map(|_| sample_trajectory(mdp, policy, rng))
        .collect()
}

/// Stochastic policy-gradient ascent `θ ← θ + η ∇̂J(θ)` with an optional
/// entropy bonus `β Σ_h γ^h ∇H(π(·|s_h))`.
pub fn spg_run<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy0: &SoftmaxPolicy,
    config: &SpgConfig,
    rng: &mut R,
) -> Result<RlRunRecord> {
    check_policy(mdp, policy0)?;
    config
        .schedule
        .validate()
        .map_err(|e| RlError::InvalidConfig(e.to_string()))?;
    if config.batch == 0 || !(config.entropy_coef >= 0.0) {
        return Err(RlError::InvalidConfig(
            "batch must be ≥ 1 and entropy_coef ≥ 0".into(),
        ));
    }
    let weighting = match config.variant {
        PgVariant::Spg => ScoreWeighting::RewardToGo,
        PgVariant::Reinforce => ScoreWeighting::FullReturn,
    };
    let gamma = mdp.discount();
    let mut policy = policy0.clone();
    let mut tracker = Tracker::new();
    let mut status = RunStatus::MaxIters;
    for t in 0..config.iters {
        if tracker.budget_spent(config.episode_budget) {
            status = RunStatus::BudgetExhausted;
            break;
        }
        let eta = config.schedule.eta(tracker.episodes as usize);
        let pool = sample_pool(mdp, &policy, config.batch, rng);
        let mut grad = estimate_from_pool(&policy, &pool, gamma, pool.len(), 0, weighting).grad;
        if config.entropy_coef > 0.0 {
            let c = config.entropy_coef / pool.len() as f64;
            let mut eg = vec![0.0; policy.dim()];
            for traj in &pool {
                entropy_gradient(&policy, traj, gamma, &mut eg);
            }
            linalg::axpy(c, &eg, &mut grad);
        }
        linalg::axpy(eta, &grad, policy.theta_mut());
        if !linalg::all_finite(policy.theta()) {
            status = RunStatus::NonFinite;
            tracker.record(t, &pool, f64::NAN, false);
            break;
        }
        tracker.record(t, &pool, eta * linalg::norm(&grad), false);
    }
    Ok(RlRunRecord {
        rows: tracker.rows,
        status,
        theta_final: policy.theta().to_vec(),
    })
}

/// Cubic-Newton ascent on `J` driven by `estimate(t, θ_t, θ_{t−1}, rng)`,
/// which returns the derivative estimates of `−J` and the trajectories it
/// consumed.
fn newton_ascent<R, E>(
    mdp: &TabularMdp,
    policy0: &SoftmaxPolicy,
    config: &ScrnConfig,
    rng: &mut R,
    mut estimate: E,
) -> Result<RlRunRecord>
where
    R: Rng + ?Sized,
    E: FnMut(
        usize,
        &SoftmaxPolicy,
        &SoftmaxPolicy,
        &mut R,
    ) -> Result<(Vec<f64>, SymMatrix, Vec<Trajectory>)>,
{
    check_policy(mdp, policy0)?;
    config.validate()?;
    let mut policy = policy0.clone();
    let mut previous = policy0.clone();
    let mut tracker = Tracker::new();
    let mut status = RunStatus::MaxIters;
    let threshold = config.stop_threshold();
    for t in 0..config.max_iters {
        if tracker.budget_spent(config.sample_budget) {
            status = RunStatus::BudgetExhausted;
            break;
        }
        let (g, h, pool) = estimate(t, &policy, &previous, rng)?;
        if !linalg::all_finite(&g) || !h.is_finite() {
            status = RunStatus::NonFinite;
            tracker.record(t, &pool, f64::NAN, true);
            break;
        }
        let sol = config.subsolver.solve(g, h, config.m_penalty, rng)?;
        let step = sol.step_norm();
        let rejected = config.delta_reject_threshold.is_some_and(|th| step > th);
        previous = policy.clone();
        if !rejected {
            linalg::axpy(1.0, &sol.delta, policy.theta_mut());
        }
        tracker.record(t, &pool, step, rejected);
        if !linalg::all_finite(policy.theta()) {
            status = RunStatus::NonFinite;
            break;
        }
        if config.stop_on_small_step && !rejected && step < threshold {
            status = RunStatus::SmallStep;
            break;
        }
    }
    Ok(RlRunRecord {
        rows: tracker.rows,
        status,
        theta_final: policy.theta().to_vec(),
    })
}

/// SCRN on `F = −J_H`. Each iteration samples `max(n1, n2)` trajectories;
/// the gradient uses the first `n1`, the Hessian the first `n2`.
/// `sample_budget` counts episodes.
pub fn scrn_rl_run<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy0: &SoftmaxPolicy,
    config: &ScrnConfig,
    rng: &mut R,
) -> Result<RlRunRecord> {
    let gamma = mdp.discount();
    newton_ascent(mdp, policy0, config, rng, |_, policy, _, rng| {
        let pool = sample_pool(mdp, policy, config.n1.max(config.n2), rng);
        let est = estimate_from_pool(
            policy,
            &pool,
            gamma,
            config.n1,
            config.n2,
            ScoreWeighting::RewardToGo,
        );
        let mut h = est.hess.expect("Hessian requested");
        h.scale(-1.0);
        Ok((linalg::scaled(-1.0, &est.grad), h, pool))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsvrConfig {
    /// Checkpoint batches are `n1`/`n2` of the base config.
    #[serde(flatten)]
    pub base: ScrnConfig,
    pub period: usize,
    /// Trajectories for the gradient correction between checkpoints.
    pub inner_grad_batch: usize,
    /// Trajectories for the Hessian correction between checkpoints.
    pub inner_hess_batch: usize,
}

/// Importance-sampled variance-reduced SCRN. Between checkpoints,
///
/// ```text
/// v_t = v_{t−1} + (1/n) Σ_τ [∇̂J(θ_t; τ) − w(τ|θ_{t−1}, θ_t) ∇̂J(θ_{t−1}; τ)],  τ ~ π_{θ_t}
/// ```
///
/// and `U_t` analogously with the per-trajectory Hessian estimate.
pub fn isvr_scrn_rl_run<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy0: &SoftmaxPolicy,
    config: &IsvrConfig,
    rng: &mut R,
) -> Result<RlRunRecord> {
    if config.period == 0 || config.inner_grad_batch == 0 || config.inner_hess_batch == 0 {
        return Err(RlError::InvalidConfig(
            "period and inner batches must be ≥ 1".into(),
        ));
    }
    let gamma = mdp.discount();
    let d = policy0.dim();
    let mut v = vec![0.0; d];
    let mut u = SymMatrix::zeros(d);
    let base = config.base;
    newton_ascent(mdp, policy0, &base, rng, |t, policy, previous, rng| {
        let pool;
        if t % config.period == 0 {
            pool = sample_pool(mdp, policy, base.n1.max(base.n2), rng);
            let est = estimate_from_pool(
                policy,
                &pool,
                gamma,
                base.n1,
                base.n2,
                ScoreWeighting::RewardToGo,
            );
            v = linalg::scaled(-1.0, &est.grad);
            u = est.hess.expect("Hessian requested");
            u.scale(-1.0);
        } else {
            let (ng, nh) = (config.inner_grad_batch, config.inner_hess_batch);
            pool = sample_pool(mdp, policy, ng.max(nh), rng);
            let (dg, dh) = estimate_correction(policy, previous, &pool, gamma, ng, nh)?;
            linalg::axpy(-1.0, &dg, &mut v);
            u.add_scaled(-1.0, &dh);
        }
        Ok((v.clone(), u.clone(), pool))
    })
}

/// Monte Carlo summary of the stochastic policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEval {
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_length: f64,
}

pub fn evaluate_policy<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &SoftmaxPolicy,
    episodes: usize,
    rng: &mut R,
) -> Result<PolicyEval> {
    check_policy(mdp, policy)?;
    if episodes == 0 {
        return Err(RlError::InvalidConfig("episodes must be ≥ 1".into()));
    }
    let (mut succ, mut ret, mut len) = (0usize, 0.0, 0.0);
    for _ in 0..episodes {
        let t = sample_trajectory(mdp, policy, rng);
        succ += t.reached_goal as usize;
        ret += t.total_reward();
        len += t.len() as f64;
    }
    let n = episodes as f64;
    Ok(PolicyEval {
        success_rate: succ as f64 / n,
        mean_return: ret / n,
        mean_length: len / n,
    })
}
