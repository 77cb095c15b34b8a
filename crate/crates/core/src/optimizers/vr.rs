use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scrn::newton_loop;
use super::{OptError, OptRunRecord, Result, ScrnConfig};
use crate::linalg::{self, norm, SymMatrix};
use crate::oracle::StochasticOracle;

/// How VR-SCRN sizes its mini-batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum VrBatchRule {
    /// `n1`/`n2` of the base config at every iteration.
    Fixed,
    /// Epoch-dependent sizes targeting error `ε_k = (kS)^{−β}` in epoch `k`:
    ///
    /// * checkpoint: `n_g = c·2σ₁²/ε_k^{2/α}`,
    ///   `n_H = c·2^{1/α}(8e·ℓ)²σ₂^{2/α}S^{1−1/α}/ε_k^{1/α}`,
    /// * otherwise: `n_g = c·4L′₁²S‖Δ‖²/ε_k^{2/α}`,
    ///   `n_H = c·4·2^{1/α}(8e·ℓ)²L′₂²S‖Δ‖²/ε_k^{1/α}`,
    ///
    /// with `ℓ = max(1, ln d)`, `‖Δ‖` the previous step and `c` the
    /// multiplier.
    Adaptive {
        #[serde(default = "one")]
        multiplier: f64,
        /// `β`
        #[serde(default = "two")]
        epoch_error_exponent: f64,
        sigma1: f64,
        sigma2: f64,
        /// Overrides the oracle's `L′₁`.
        #[serde(default)]
        sample_gradient_lipschitz: Option<f64>,
        /// Overrides the oracle's `L′₂`.
        #[serde(default)]
        sample_hessian_lipschitz: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn default_cap() -> usize {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VrScrnConfig {
    #[serde(flatten)]
    pub base: ScrnConfig,
    /// Checkpoint period `S`.
    pub period: usize,
    #[serde(default = "default_cap")]
    pub batch_cap: usize,
    pub batches: VrBatchRule,
}

impl VrScrnConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.period == 0 || self.batch_cap == 0 {
            return Err(OptError::InvalidConfig(
                "period and batch_cap must be ≥ 1".into(),
            ));
        }
        if let VrBatchRule::Adaptive {
            multiplier,
            epoch_error_exponent,
            sigma1,
            sigma2,
            ..
        } = self.batches
        {
            if !(multiplier > 0.0) || !(epoch_error_exponent > 0.0) {
                return Err(OptError::InvalidConfig(
                    "multiplier and epoch_error_exponent must be positive".into(),
                ));
            }
            if !(sigma1 >= 0.0 && sigma2 >= 0.0) {
                return Err(OptError::InvalidConfig("sigma1, sigma2 must be ≥ 0".into()));
            }
        }
        Ok(())
    }
}

/// `(n_g, n_H)` for iteration `t` (0-based). `prev_step` is `‖x_t − x_{t−1}‖`
/// and is ignored at checkpoints. `l1`, `l2` are `L′₁`, `L′₂`.
pub fn vr_batch_sizes(
    config: &VrScrnConfig,
    t: usize,
    dim: usize,
    prev_step: f64,
    l1: f64,
    l2: f64,
) -> (usize, usize) {
    let s = config.period;
    let checkpoint = t.is_multiple_of(s);
    let cap = config.batch_cap as f64;
    let clamp = |v: f64| -> usize {
        if v.is_nan() {
            1
        } else {
            v.ceil().clamp(1.0, cap) as usize
        }
    };
    match config.batches {
        VrBatchRule::Fixed => (config.base.n1, config.base.n2),
        VrBatchRule::Adaptive {
            multiplier: c,
            epoch_error_exponent: beta,
            sigma1,
            sigma2,
            ..
        } => {
            let alpha = config.base.alpha;
            let k = (t / s + 1) as f64;
            let eps_k = (k * s as f64).powf(-beta);
            let sf = s as f64;
            let ell = (dim as f64).ln().max(1.0);
            let conc = (8.0 * std::f64::consts::E * ell).powi(2);
            let two_a = 2f64.powf(1.0 / alpha);
            let g_scale = eps_k.powf(-2.0 / alpha);
            let h_scale = eps_k.powf(-1.0 / alpha);
            if checkpoint {
                (
                    clamp(c * 2.0 * sigma1 * sigma1 * g_scale),
                    clamp(
                        c * two_a
                            * conc
                            * sigma2.powf(2.0 / alpha)
                            * sf.powf(1.0 - 1.0 / alpha)
                            * h_scale,
                    ),
                )
            } else {
                let d2 = prev_step * prev_step;
                (
                    clamp(c * 4.0 * l1 * l1 * sf * d2 * g_scale),
                    clamp(c * 4.0 * two_a * conc * l2 * l2 * sf * d2 * h_scale),
                )
            }
        }
    }
}

/// Variance-reduced SCRN. Fresh mini-batches are drawn every `period`
/// iterations; in between, the estimates are updated recursively with
/// gradient and Hessian differences evaluated on shared samples:
///
/// ```text
/// v_t = v_{t−1} + mean_J[∇f(x_t, ξ) − ∇f(x_{t−1}, ξ)]
/// U_t = U_{t−1} + mean_I[∇²f(x_t, ξ) − ∇²f(x_{t−1}, ξ)]
/// ```
pub fn vr_scrn_run<O, R>(
    oracle: &mut O,
    config: &VrScrnConfig,
    x0: &[f64],
    rng: &mut R,
) -> Result<OptRunRecord>
where
    O: StochasticOracle,
    R: Rng + ?Sized,
{
    config.validate()?;
    let (l1, l2) = match config.batches {
        VrBatchRule::Fixed => (0.0, 0.0),
        VrBatchRule::Adaptive {
            sample_gradient_lipschitz,
            sample_hessian_lipschitz,
            ..
        } => {
            let k = oracle.constants();
            (
                sample_gradient_lipschitz
                    .or(k.sample_gradient_lipschitz)
                    .ok_or(OptError::MissingConstant("sample_gradient_lipschitz"))?,
                sample_hessian_lipschitz
                    .or(k.sample_hessian_lipschitz)
                    .ok_or(OptError::MissingConstant("sample_hessian_lipschitz"))?,
            )
        }
    };
    let dim = oracle.dim();
    let mut v: Vec<f64> = vec![0.0; dim];
    let mut u = SymMatrix::zeros(dim.max(1));
    let mut x_prev: Vec<f64> = x0.to_vec();

    newton_loop(oracle, &config.base, x0, rng, |o, t, x, rng| {
        let step = norm(&linalg::sub(x, &x_prev));
        let (n_g, n_h) = vr_batch_sizes(config, t, dim, step, l1, l2);
        if t % config.period == 0 {
            v = o.sample_gradient(x, n_g, rng);
            u = o.sample_hessian(x, n_h, rng);
        } else {
            let dg = o.sample_gradient_difference(x, &x_prev, n_g, rng);
            linalg::axpy(1.0, &dg, &mut v);
            u.add_scaled(1.0, &o.sample_hessian_difference(x, &x_prev, n_h, rng));
        }
        x_prev = x.to_vec();
        (v.clone(), u.clone())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::scrn_run;
    use crate::oracle::SyntheticSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn adaptive(sigma: f64) -> VrBatchRule {
        VrBatchRule::Adaptive {
            multiplier: 1.0,
            epoch_error_exponent: 2.0,
            sigma1: sigma,
            sigma2: sigma,
            sample_gradient_lipschitz: None,
            sample_hessian_lipschitz: None,
        }
    }

    #[test]
    fn period_one_equals_scrn() {
        let spec = SyntheticSpec::power(4, 1).with_noise(0.1, 0.1);
        let base = ScrnConfig::new(58.0, 20, 5, 15);
        let cfg = VrScrnConfig {
            base,
            period: 1,
            batch_cap: 10_000,
            batches: VrBatchRule::Fixed,
        };
        let mut f1 = spec.build().unwrap();
        let mut f2 = spec.build().unwrap();
        let a = vr_scrn_run(&mut f1, &cfg, &[0.9], &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = scrn_run(&mut f2, &base, &[0.9], &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_telescope_is_exact() {
        let spec = SyntheticSpec::power(4, 1).with_dim(2);
        let mut f = spec.build().unwrap();
        let cfg = VrScrnConfig {
            base: ScrnConfig::new(58.0, 1, 1, 12),
            period: 5,
            batch_cap: 100,
            batches: adaptive(0.0),
        };
        let mut g = spec.build().unwrap();
        let vr = vr_scrn_run(
            &mut f,
            &cfg,
            &[0.7, -0.4],
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let mut base = cfg.base;
        base.n1 = 1;
        base.n2 = 1;
        let crn = crate::optimizers::crn_run(
            &mut g,
            &base,
            &[0.7, -0.4],
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        for (a, b) in vr.rows.iter().zip(&crn.rows) {
            assert!(
                (a.gap - b.gap).abs() <= 1e-9 * b.gap.max(1e-300),
                "{} {}",
                a.gap,
                b.gap
            );
        }
    }

    #[test]
    fn batch_sizes_follow_the_schedule() {
        let cfg = VrScrnConfig {
            base: ScrnConfig::new(10.0, 1, 1, 10),
            period: 4,
            batch_cap: 1_000_000,
            batches: adaptive(0.1),
        };
        // t = 0: k = 1, kS = 4, ε = 4^{-2}, n_g = 2 · 0.01 · 4^4
        let (ng, nh) = vr_batch_sizes(&cfg, 0, 1, 0.0, 12.0, 24.0);
        assert_eq!(ng, 6);
        let conc = (8.0 * std::f64::consts::E).powi(2);
        assert_eq!(nh, (2.0 * conc * 0.01 * 16.0).ceil() as usize);
        // t = 5: k = 2, off-checkpoint
        let (ng, _) = vr_batch_sizes(&cfg, 5, 1, 0.01, 12.0, 24.0);
        assert_eq!(
            ng,
            (4.0f64 * 144.0 * 4.0 * 1e-4 * 8f64.powi(4)).ceil() as usize
        );
        let (ng, nh) = vr_batch_sizes(&cfg, 5, 1, 0.0, 12.0, 24.0);
        assert_eq!((ng, nh), (1, 1));
        let capped = VrScrnConfig {
            batch_cap: 50,
            ..cfg
        };
        assert_eq!(vr_batch_sizes(&capped, 0, 1, 0.0, 12.0, 24.0).1, 50);
    }
}
