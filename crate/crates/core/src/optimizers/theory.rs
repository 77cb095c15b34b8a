use serde::{Deserialize, Serialize};

use super::{OptError, Result};

/// Constants of the one-step recursion
/// `F(x⁺) − F* ≤ C (F(x) − F(x⁺))^{2α/3} + C_g ‖∇F − g‖^α + C_H ‖∇²F − H‖^{2α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionConstants {
    pub c: f64,
    pub c_g: f64,
    pub c_h: f64,
    /// `C_H · 2^{2α} (e · max(2α, ln d))^α`, the Hessian constant after the
    /// matrix concentration step.
    pub c_h_prime: f64,
}

impl RecursionConstants {
    /// Requires `3M − 2L₂ − 8 > 0`.
    pub fn from_problem(alpha: f64, tau: f64, m: f64, l2: f64, dim: usize) -> Result<Self> {
        let denom = 3.0 * m - 2.0 * l2 - 8.0;
        if !(denom > 0.0) {
            return Err(OptError::InvalidConfig(format!(
                "recursion constants need 3M − 2L₂ − 8 > 0, got {denom}"
            )));
        }
        if !(tau > 0.0) || !(1.0..=2.0).contains(&alpha) {
            return Err(OptError::InvalidConfig(
                "need tau > 0 and alpha in [1, 2]".into(),
            ));
        }
        let core =
            tau * ((m + l2 + 1.0) / 2.0).powf(alpha) * (12.0 / denom).powf(2.0 * alpha / 3.0);
        let c = 3f64.powf((5.0 * alpha - 4.0) / 3.0) * core;
        let mid = 3f64.powf((5.0 * alpha - 7.0) / 3.0) * core;
        let c_g = 2f64.powf(2.0 * alpha / 3.0) * mid + 3f64.powf(alpha - 1.0) * tau;
        let c_h =
            2f64.powf(-2.0 * alpha / 3.0) * mid + 3f64.powf(alpha - 1.0) * 2f64.powf(-alpha) * tau;
        let log_d = (dim.max(1) as f64).ln();
        let c_h_prime = c_h
            * 2f64.powf(2.0 * alpha)
            * (std::f64::consts::E * (2.0 * alpha).max(log_d)).powf(alpha);
        Ok(Self {
            c,
            c_g,
            c_h,
            c_h_prime,
        })
    }
}

/// Batch sizes `(n1, n2)` that make the expected stochastic error terms of
/// the recursion of order `ε`. Values beyond `u64::MAX` saturate.
pub fn scrn_batch_sizes(
    epsilon: f64,
    alpha: f64,
    sigma1: f64,
    sigma2: f64,
    k: &RecursionConstants,
) -> Result<(u64, u64)> {
    let (n1, n2) = scrn_batch_targets(epsilon, alpha, sigma1, sigma2, k)?;
    // `as` saturates on overflow
    Ok(((n1.ceil() as u64).max(1), (n2.ceil() as u64).max(1)))
}

/// The unrounded right-hand sides behind [`scrn_batch_sizes`].
pub fn scrn_batch_targets(
    epsilon: f64,
    alpha: f64,
    sigma1: f64,
    sigma2: f64,
    k: &RecursionConstants,
) -> Result<(f64, f64)> {
    let positive = [epsilon, sigma1, sigma2, k.c, k.c_g, k.c_h_prime];
    if positive.iter().any(|v| !(*v > 0.0)) {
        return Err(OptError::InvalidConfig(
            "epsilon, noise levels and constants must be positive".into(),
        ));
    }
    if !(1.0..=2.0).contains(&alpha) {
        return Err(OptError::InvalidConfig("alpha must lie in [1, 2]".into()));
    }
    let n1 = k.c_g.powf(2.0 / alpha) / k.c.powf(6.0 / alpha)
        * 4f64.powf(2.0 / alpha)
        * sigma1.powf(2.0 / alpha)
        / epsilon.powf(2.0 / alpha);
    let n2 = k.c_h_prime.powf(1.0 / alpha) / k.c.powf(3.0 / alpha)
        * 4f64.powf(1.0 / alpha)
        * sigma2.powf(2.0 / alpha)
        / epsilon.powf(1.0 / alpha);
    Ok((n1, n2))
}

/// `2 L₂ + 10`, which keeps `3M − 2L₂ − 8` positive.
pub fn default_penalty(l2: f64) -> f64 {
    2.0 * l2 + 10.0
}
