use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mdp::sample_index;
use super::{Result, RlError};
use crate::linalg::SymMatrix;

/// Tabular softmax policy `π(a|s) ∝ exp(θ[s, a])`, parameters flattened
/// state-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxPolicy {
    n_states: usize,
    n_actions: usize,
    theta: Vec<f64>,
}

impl SoftmaxPolicy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        assert!(n_states >= 1 && n_actions >= 1);
        Self {
            n_states,
            n_actions,
            theta: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_theta(n_states: usize, n_actions: usize, theta: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || theta.len() != n_states * n_actions {
            return Err(RlError::ParamDim {
                expected: n_states * n_actions,
                got: theta.len(),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            theta,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn logits(&self, s: usize) -> &[f64] {
        &self.theta[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Log-probabilities of every action in state `s`.
    pub fn log_probs(&self, s: usize) -> Vec<f64> {
        let z = self.logits(s);
        let mx = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + z.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        z.iter().map(|v| v - lse).collect()
    }

    pub fn probs(&self, s: usize) -> Vec<f64> {
        let z = self.logits(s);
        let mx = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - mx).exp()).collect();
        let total: f64 = e.iter().sum();
        e.into_iter().map(|v| v / total).collect()
    }

    pub fn log_prob(&self, s: usize, a: usize) -> f64 {
        self.log_probs(s)[a]
    }

    pub fn entropy(&self, s: usize) -> f64 {
        self.probs(s)
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        let p = self.probs(s);
        sample_index(p.iter().copied(), rng)
    }

    /// Most likely action (first on ties).
    pub fn greedy_action(&self, s: usize) -> usize {
        let z = self.logits(s);
        (0..z.len()).fold(0, |best, a| if z[a] > z[best] { a } else { best })
    }

    fn check(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(RlError::IndexOutOfRange {
                state: s,
                action: a,
            });
        }
        Ok(())
    }

    /// `∇_{θ_s} log π(a|s) = 1_a − π(·|s)`; the only nonzero block.
    pub fn score_block(&self, s: usize, a: usize) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs(s).iter().map(|p| -p).collect();
        g[a] += 1.0;
        g
    }

    /// `∇²_{θ_s} log π(a|s) = π πᵀ − Diag(π)`, row-major; independent of `a`.
    pub fn log_hessian_block(&self, s: usize) -> Vec<f64> {
        let p = self.probs(s);
        let k = p.len();
        let mut h = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                h[i * k + j] = p[i] * p[j];
            }
            h[i * k + i] -= p[i];
        }
        h
    }

    /// `∇_{θ_s} H(π(·|s))`, with `∂H/∂θ_b = −π_b (log π_b + H)`.
    pub fn entropy_gradient_block(&self, s: usize) -> Vec<f64> {
        let p = self.probs(s);
        let lp = self.log_probs(s);
        let h: f64 = p.iter().zip(&lp).map(|(p, l)| -p * l).sum();
        p.iter().zip(&lp).map(|(p, l)| -p * (l + h)).collect()
    }
}

/// Full-dimensional score and log-policy Hessian of `(s, a)`.
pub fn score_and_hessian(
    policy: &SoftmaxPolicy,
    s: usize,
    a: usize,
) -> Result<(Vec<f64>, SymMatrix)> {
    policy.check(s, a)?;
    let k = policy.n_actions();
    let off = s * k;
    let mut g = vec![0.0; policy.dim()];
    g[off..off + k].copy_from_slice(&policy.score_block(s, a));
    let block = policy.log_hessian_block(s);
    let mut h = SymMatrix::zeros(policy.dim());
    for i in 0..k {
        for j in i..k {
            h.set(off + i, off + j, block[i * k + j]);
        }
    }
    Ok((g, h))
}
