use rand::Rng;

use super::mdp::TabularMdp;
use super::policy::SoftmaxPolicy;
use super::{Result, RlError};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub reached_goal: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut g = 0.0;
        for s in self.steps.iter().rev() {
            g = s.reward + gamma * g;
        }
        g
    }

    /// `Ψ_h = Σ_{t ≥ h} γᵗ r_t` for every step `h`.
    pub fn reward_to_go(&self, gamma: f64) -> Vec<f64> {
        let n = self.steps.len();
        let mut disc = vec![1.0; n];
        for h in 1..n {
            disc[h] = disc[h - 1] * gamma;
        }
        let mut psi = vec![0.0; n];
        let mut acc = 0.0;
        for h in (0..n).rev() {
            acc += disc[h] * self.steps[h].reward;
            psi[h] = acc;
        }
        psi
    }
}

/// Rolls out `policy` from `ρ` until a terminal state is entered or the
/// horizon is reached.
pub fn sample_trajectory<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &SoftmaxPolicy,
    rng: &mut R,
) -> Trajectory {
    let mut s = mdp.sample_start(rng);
    let mut steps = Vec::new();
    let mut reached_goal = false;
    while steps.len() < mdp.horizon() && !mdp.is_terminal(s) {
        let a = policy.sample_action(s, rng);
        let reward = mdp.reward(s, a);
        steps.push(Step {
            state: s,
            action: a,
            reward,
        });
        s = mdp.sample_next(s, a, rng);
        if mdp.is_goal(s) {
            reached_goal = true;
        }
    }
    Trajectory {
        steps,
        reached_goal,
    }
}

/// Weighting of the per-step scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreWeighting {
    /// Reward-to-go `Ψ_h` (GPOMDP).
    RewardToGo,
    /// Full discounted return on every step (REINFORCE).
    FullReturn,
}

/// Per-trajectory quantities restricted to the visited states.
struct TrajectoryTerms {
    k: usize,
    states: Vec<usize>,
    /// `Σ_h w_h ∇log π(a_h|s_h)` per visited state block.
    g: Vec<f64>,
    /// `Σ_h ∇log π(a_h|s_h)`.
    u: Vec<f64>,
    /// `Σ_{h: s_h = s} w_h` per visited state.
    psi: Vec<f64>,
}

impl TrajectoryTerms {
    fn new(
        policy: &SoftmaxPolicy,
        traj: &Trajectory,
        gamma: f64,
        weighting: ScoreWeighting,
    ) -> Self {
        let k = policy.n_actions();
        let weights = match weighting {
            ScoreWeighting::RewardToGo => traj.reward_to_go(gamma),
            ScoreWeighting::FullReturn => vec![traj.discounted_return(gamma); traj.len()],
        };
        let mut states: Vec<usize> = Vec::new();
        let mut g: Vec<f64> = Vec::new();
        let mut u: Vec<f64> = Vec::new();
        let mut psi: Vec<f64> = Vec::new();
        for (step, w) in traj.steps.iter().zip(weights) {
            let slot = match states.iter().position(|&s| s == step.state) {
                Some(i) => i,
                None => {
                    states.push(step.state);
                    g.extend(std::iter::repeat_n(0.0, k));
                    u.extend(std::iter::repeat_n(0.0, k));
                    psi.push(0.0);
                    states.len() - 1
                }
            };
            let score = policy.score_block(step.state, step.action);
            for (j, sc) in score.iter().enumerate() {
                g[slot * k + j] += w * sc;
                u[slot * k + j] += sc;
            }
            psi[slot] += w;
        }
        Self {
            k,
            states,
            g,
            u,
            psi,
        }
    }

    fn add_gradient(&self, c: f64, grad: &mut [f64]) {
        let k = self.k;
        for (i, &s) in self.states.iter().enumerate() {
            for j in 0..k {
                grad[s * k + j] += c * self.g[i * k + j];
            }
        }
    }

    /// Adds `c · [sym(g uᵀ) + Σ_s ψ_s B_s]` to a dense row-major matrix of
    /// side `d`.
    fn add_hessian(&self, c: f64, policy: &SoftmaxPolicy, hess: &mut [f64], d: usize) {
        let k = self.k;
        let n = self.states.len();
        for a in 0..n {
            for b in 0..n {
                let (sa, sb) = (self.states[a], self.states[b]);
                for i in 0..k {
                    let gi = self.g[a * k + i];
                    let ui = self.u[a * k + i];
                    let row = (sa * k + i) * d + sb * k;
                    for j in 0..k {
                        let v = 0.5 * (gi * self.u[b * k + j] + ui * self.g[b * k + j]);
                        hess[row + j] += c * v;
                    }
                }
            }
        }
        for (a, &s) in self.states.iter().enumerate() {
            let block = policy.log_hessian_block(s);
            let w = c * self.psi[a];
            for i in 0..k {
                let row = (s * k + i) * d + s * k;
                for j in 0..k {
                    hess[row + j] += w * block[i * k + j];
                }
            }
        }
    }
}

/// Mini-batch policy-gradient estimates of the truncated return `J_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct PgBatchEstimate {
    pub grad: Vec<f64>,
    pub hess: Option<SymMatrix>,
    /// Trajectories used.
    pub m: usize,
    /// Mean discounted return of the batch.
    pub est_return: f64,
}

/// Gradient (first `n_grad` trajectories) and optionally Hessian (first
/// `n_hess`) of `J_H` from an already sampled pool.
pub fn estimate_from_pool(
    policy: &SoftmaxPolicy,
    pool: &[Trajectory],
    gamma: f64,
    n_grad: usize,
    n_hess: usize,
    weighting: ScoreWeighting,
) -> PgBatchEstimate {
    let d = policy.dim();
    let n_grad = n_grad.min(pool.len());
    let n_hess = n_hess.min(pool.len());
    let mut grad = vec![0.0; d];
    let mut hess = (n_hess > 0).then(|| vec![0.0; d * d]);
    for (i, traj) in pool.iter().enumerate().take(n_grad.max(n_hess)) {
        let terms = TrajectoryTerms::new(policy, traj, gamma, weighting);
        if i < n_grad {
            terms.add_gradient(1.0 / n_grad as f64, &mut grad);
        }
        if let (Some(h), true) = (hess.as_mut(), i < n_hess) {
            terms.add_hessian(1.0 / n_hess as f64, policy, h, d);
        }
    }
    let used = n_grad.max(n_hess).max(1);
    let est_return = pool
        .iter()
        .take(used)
        .map(|t| t.discounted_return(gamma))
        .sum::<f64>()
        / used as f64;
    PgBatchEstimate {
        grad,
        hess: hess.map(|h| SymMatrix::symmetrize(d, h)),
        m: n_grad.max(n_hess),
        est_return,
    }
}

/// Importance-weighted correction `(1/n) Σ_τ [∇̂(θ_new; τ) − w(τ) ∇̂(θ_old; τ)]`
/// (and the Hessian analogue on the first `n_hess` trajectories) for
/// trajectories sampled under `θ_new`.
pub fn estimate_correction(
    new: &SoftmaxPolicy,
    old: &SoftmaxPolicy,
    pool: &[Trajectory],
    gamma: f64,
    n_grad: usize,
    n_hess: usize,
) -> Result<(Vec<f64>, SymMatrix)> {
    let d = new.dim();
    let n_grad = n_grad.min(pool.len());
    let n_hess = n_hess.min(pool.len());
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    for (i, traj) in pool.iter().enumerate().take(n_grad.max(n_hess)) {
        let w = importance_weight(traj, old, new)?;
        let t_new = TrajectoryTerms::new(new, traj, gamma, ScoreWeighting::RewardToGo);
        let t_old = TrajectoryTerms::new(old, traj, gamma, ScoreWeighting::RewardToGo);
        if i < n_grad {
            let c = 1.0 / n_grad as f64;
            t_new.add_gradient(c, &mut grad);
            t_old.add_gradient(-c * w, &mut grad);
        }
        if i < n_hess {
            let c = 1.0 / n_hess as f64;
            t_new.add_hessian(c, new, &mut hess, d);
            t_old.add_hessian(-c * w, old, &mut hess, d);
        }
    }
    Ok((grad, SymMatrix::symmetrize(d, hess)))
}

/// GPOMDP estimate `(1/m) Σ_τ Σ_h Ψ_h ∇log π(a_h|s_h)` of `∇J_H`.
pub fn estimate_gradient<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &SoftmaxPolicy,
    m: usize,
    rng: &mut R,
) -> Result<PgBatchEstimate> {
    check_batch(m)?;
    let pool: Vec<Trajectory> = (0..m)
        .map(|_| sample_trajectory(mdp, policy, rng))
        .collect();
    Ok(estimate_from_pool(
        policy,
        &pool,
        mdp.discount(),
        m,
        0,
        ScoreWeighting::RewardToGo,
    ))
}

/// Estimate of `∇²J_H` averaging `sym(∇Φ ∇log p(τ)ᵀ) + ∇²Φ` over `m`
/// trajectories, where `Φ(θ; τ) = Σ_h Ψ_h log π(a_h|s_h)`. The gradient
/// field holds the GPOMDP estimate of the same trajectories.
pub fn estimate_hessian<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &SoftmaxPolicy,
    m: usize,
    rng: &mut R,
) -> Result<PgBatchEstimate> {
    check_batch(m)?;
    let pool: Vec<Trajectory> = (0..m)
        .map(|_| sample_trajectory(mdp, policy, rng))
        .collect();
    Ok(estimate_from_pool(
        policy,
        &pool,
        mdp.discount(),
        m,
        m,
        ScoreWeighting::RewardToGo,
    ))
}

fn check_batch(m: usize) -> Result<()> {
    if m == 0 {
        return Err(RlError::InvalidConfig("batch size must be ≥ 1".into()));
    }
    Ok(())
}

/// `Σ_h γ^h ∇H(π(·|s_h))` along the trajectory.
pub fn entropy_gradient(policy: &SoftmaxPolicy, traj: &Trajectory, gamma: f64, out: &mut [f64]) {
    let k = policy.n_actions();
    let mut disc = 1.0;
    for step in &traj.steps {
        let g = policy.entropy_gradient_block(step.state);
        for (j, v) in g.iter().enumerate() {
            out[step.state * k + j] += disc * v;
        }
        disc *= gamma;
    }
}

/// `w(τ) = Π_h π_old(a_h|s_h) / π_new(a_h|s_h)` for `τ` drawn under the new
/// policy; computed in log space.
pub fn importance_weight(
    traj: &Trajectory,
    old: &SoftmaxPolicy,
    new: &SoftmaxPolicy,
) -> Result<f64> {
    let mut log_w = 0.0;
    for step in &traj.steps {
        let lp_new = new.log_prob(step.state, step.action);
        if lp_new.exp() == 0.0 {
            return Err(RlError::ZeroDenominator {
                state: step.state,
                action: step.action,
            });
        }
        log_w += old.log_prob(step.state, step.action) - lp_new;
    }
    Ok(log_w.exp())
}

/// Exact truncated return `J_H(θ)` by backward induction over the horizon.
pub fn exact_return(mdp: &TabularMdp, policy: &SoftmaxPolicy) -> f64 {
    let n = mdp.n_states();
    let gamma = mdp.discount();
    let mut v = vec![0.0; n];
    let probs: Vec<Vec<f64>> = (0..n).map(|s| policy.probs(s)).collect();
    for _ in 0..mdp.horizon() {
        let mut next = vec![0.0; n];
        for s in 0..n {
            if mdp.is_terminal(s) {
                continue;
            }
            next[s] = probs[s]
                .iter()
                .enumerate()
                .map(|(a, p)| {
                    let cont: f64 = mdp.transitions(s, a).iter().map(|&(s2, q)| q * v[s2]).sum();
                    p * (mdp.reward(s, a) + gamma * cont)
                })
                .sum();
        }
        v = next;
    }
    mdp.start_dist().iter().zip(&v).map(|(p, x)| p * x).sum()
}
