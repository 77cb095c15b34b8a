//! Stochastic objectives `F(x) = E[f(x, ξ)]` and the synthetic
//! gradient-dominant test functions.
//!
//! Noise is additive: a single gradient sample is `∇F(x) + ξ` with
//! `ξ ~ N(0, σ₁²/d · I)`, so `E‖ξ‖² = σ₁²`. A single Hessian sample is
//! `∇²F(x) + (G + Gᵀ)/2` with `G` iid Gaussian scaled so that the Frobenius
//! second moment of the perturbation equals `σ₂²` (which bounds the
//! operator-norm second moment, with equality in one dimension). Batches of
//! `n` samples are averaged, shrinking both second moments by `1/n`.
//!
//! Because the noise does not depend on `x`, two evaluations that share the
//! same `ξ` differ by exactly `∇F(x) − ∇F(y)`; see
//! [`StochasticOracle::sample_gradient_difference`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{norm, SymMatrix};

/// Upper end of the admissible `a` range for `x² + a·sin²(x)`.
pub const SIN_QUADRATIC_A_MAX: f64 = 4.6033;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid synthetic specification: {0}")]
    BadSpec(String),
    #[error("empty evaluation grid")]
    EmptyGrid,
    #[error("point has dimension {got}, oracle expects {expected}")]
    DimMismatch { expected: usize, got: usize },
}

/// Cumulative number of single-sample queries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounters {
    pub gradient: u64,
    pub hessian: u64,
}

impl SampleCounters {
    pub fn total(&self) -> u64 {
        self.gradient + self.hessian
    }
}

/// Constants of an objective that the theory consumes. Any of them may be
/// unknown for a general oracle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Gradient dominance exponent α.
    pub alpha: Option<f64>,
    /// Gradient dominance constant τ_F.
    pub tau: Option<f64>,
    /// Lipschitz constant of ∇F on the certified domain.
    pub gradient_lipschitz: Option<f64>,
    /// Lipschitz constant of ∇²F on the certified domain (L₂).
    pub hessian_lipschitz: Option<f64>,
    /// Mean-square smoothness of individual sample gradients (L′₁).
    pub sample_gradient_lipschitz: Option<f64>,
    /// Mean-square smoothness of individual sample Hessians (L′₂).
    pub sample_hessian_lipschitz: Option<f64>,
}

/// Source of exact values and mini-batch derivative estimates.
///
/// One oracle instance belongs to one optimizer run; counters are advanced
/// through `&mut self` by exactly the batch size of each call.
pub trait StochasticOracle {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> SymMatrix;
    fn optimum_value(&self) -> f64;

    /// Mean of `n` independent gradient samples at `x`.
    fn sample_gradient<R: Rng + ?Sized>(&mut self, x: &[f64], n: usize, rng: &mut R) -> Vec<f64>;

    /// Mean of `n` independent Hessian samples at `x`.
    fn sample_hessian<R: Rng + ?Sized>(&mut self, x: &[f64], n: usize, rng: &mut R) -> SymMatrix;

    /// Mean over `n` shared samples ξ of `∇f(x, ξ) − ∇f(y, ξ)`.
    /// Counts `n` gradient queries.
    fn sample_gradient_difference<R: Rng + ?Sized>(
        &mut self,
        x: &[f64],
        y: &[f64],
        n: usize,
        rng: &mut R,
    ) -> Vec<f64>;

    /// Mean over `n` shared samples ξ of `∇²f(x, ξ) − ∇²f(y, ξ)`.
    /// Counts `n` Hessian queries.
    fn sample_hessian_difference<R: Rng + ?Sized>(
        &mut self,
        x: &[f64],
        y: &[f64],
        n: usize,
        rng: &mut R,
    ) -> SymMatrix;

    fn counters(&self) -> SampleCounters;

    fn constants(&self) -> ProblemConstants {
        ProblemConstants::default()
    }

    fn gap(&self, x: &[f64]) -> f64 {
        self.value(x) - self.optimum_value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SyntheticFamily {
    /// `|x|^{p/q}` with `p` even and `q < p`.
    Power { p: u32, q: u32 },
    /// `x² + a·sin²(x)` with `0 ≤ a ≤ 4.6033`.
    SinQuadratic { a: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub family: SyntheticFamily,
    #[serde(default)]
    pub noise_sigma_grad: f64,
    #[serde(default)]
    pub noise_sigma_hess: f64,
    /// Number of separable copies; `F(x) = Σᵢ f(xᵢ)`.
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    1
}

impl SyntheticSpec {
    pub fn power(p: u32, q: u32) -> Self {
        Self {
            family: SyntheticFamily::Power { p, q },
            noise_sigma_grad: 0.0,
            noise_sigma_hess: 0.0,
            dim: 1,
        }
    }

    pub fn sin_quadratic(a: f64) -> Self {
        Self {
            family: SyntheticFamily::SinQuadratic { a },
            noise_sigma_grad: 0.0,
            noise_sigma_hess: 0.0,
            dim: 1,
        }
    }

    pub fn with_noise(mut self, sigma_grad: f64, sigma_hess: f64) -> Self {
        self.noise_sigma_grad = sigma_grad;
        self.noise_sigma_hess = sigma_hess;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    /// Gradient dominance exponent implied by the family.
    pub fn alpha(&self) -> f64 {
        match self.family {
            SyntheticFamily::Power { p, q } => p as f64 / (p - q) as f64,
            SyntheticFamily::SinQuadratic { .. } => 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.dim == 0 {
            return Err(OracleError::BadSpec("dim must be at least 1".into()));
        }
        if !(self.noise_sigma_grad >= 0.0 && self.noise_sigma_hess >= 0.0) {
            return Err(OracleError::BadSpec(
                "noise levels must be nonnegative".into(),
            ));
        }
        match self.family {
            SyntheticFamily::Power { p, q } => {
                if p == 0 || p % 2 != 0 {
                    return Err(OracleError::BadSpec(format!(
                        "p = {p} must be even and positive"
                    )));
                }
                if q == 0 || q >= p {
                    return Err(OracleError::BadSpec(format!(
                        "q = {q} must satisfy 0 < q < p"
                    )));
                }
            }
            SyntheticFamily::SinQuadratic { a } => {
                if !(0.0..=SIN_QUADRATIC_A_MAX + 1e-9).contains(&a) {
                    return Err(OracleError::BadSpec(format!(
                        "a = {a} outside [0, {SIN_QUADRATIC_A_MAX}]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<SyntheticOracle, OracleError> {
        match self.family {
            SyntheticFamily::Power { .. } => make_power_fn(self),
            SyntheticFamily::SinQuadratic { .. } => make_sin_quadratic_fn(self),
        }
    }
}

/// Scalar building block of a separable synthetic objective.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    /// `|x|^e`
    Power {
        exponent: f64,
    },
    SinQuadratic {
        a: f64,
    },
}

impl Scalar {
    fn value(&self, x: f64) -> f64 {
        match *self {
            Scalar::Power { exponent } => x.abs().powf(exponent),
            Scalar::SinQuadratic { a } => x * x + a * x.sin().powi(2),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match *self {
            Scalar::Power { exponent } => {
                if x == 0.0 {
                    0.0
                } else {
                    exponent * x.signum() * x.abs().powf(exponent - 1.0)
                }
            }
            Scalar::SinQuadratic { a } => 2.0 * x + a * (2.0 * x).sin(),
        }
    }

    fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            Scalar::Power { exponent } => {
                if x == 0.0 {
                    if exponent > 2.0 {
                        0.0
                    } else if exponent == 2.0 {
                        2.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    exponent * (exponent - 1.0) * x.abs().powf(exponent - 2.0)
                }
            }
            Scalar::SinQuadratic { a } => 2.0 + 2.0 * a * (2.0 * x).cos(),
        }
    }
}

/// Separable synthetic objective with additive Gaussian sampling noise.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    spec: SyntheticSpec,
    scalar: Scalar,
    constants: ProblemConstants,
    counters: SampleCounters,
}

impl SyntheticOracle {
    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    fn check_dim(&self, x: &[f64]) {
        assert_eq!(
            x.len(),
            self.spec.dim,
            "point dimension does not match the oracle"
        );
    }

    fn gradient_noise<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let d = self.spec.dim;
        let sigma = self.spec.noise_sigma_grad;
        if sigma == 0.0 || n == 0 {
            return vec![0.0; d];
        }
        // mean of n iid N(0, σ²/d) is N(0, σ²/(d n))
        let sd = sigma / ((d * n) as f64).sqrt();
        (0..d)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn hessian_noise<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SymMatrix {
        let d = self.spec.dim;
        let sigma = self.spec.noise_sigma_hess;
        let mut m = SymMatrix::zeros(d);
        if sigma == 0.0 || n == 0 {
            return m;
        }
        // (G + Gᵀ)/2 with G_ij ~ N(0, s²): diagonal variance s², off-diagonal s²/2,
        // so E‖·‖_F² = s² d (d + 1) / 2.
        let s = sigma * (2.0 / (d * (d + 1)) as f64).sqrt() / (n as f64).sqrt();
        for i in 0..d {
            for j in i..d {
                let z: f64 = rng.sample(StandardNormal);
                let v = if i == j { s * z } else { s * z / 2f64.sqrt() };
                m.set(i, j, v);
            }
        }
        m
    }
}

impl StochasticOracle for SyntheticOracle {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.check_dim(x);
        x.iter().map(|&xi| self.scalar.value(xi)).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.check_dim(x);
        x.iter().map(|&xi| self.scalar.derivative(xi)).collect()
    }

    fn hessian(&self, x: &[f64]) -> SymMatrix {
        self.check_dim(x);
        let diag: Vec<f64> = x
            .iter()
            .map(|&xi| self.scalar.second_derivative(xi))
            .collect();
        SymMatrix::from_diag(&diag)
    }

    fn optimum_value(&self) -> f64 {
        0.0
    }

    fn sample_gradient<R: Rng + ?Sized>(&mut self, x: &[f64], n: usize, rng: &mut R) -> Vec<f64> {
        let mut g = self.gradient(x);
        let noise = self.gradient_noise(n, rng);
        crate::linalg::axpy(1.0, &noise, &mut g);
        self.counters.gradient += n as u64;
        g
    }

    fn sample_hessian<R: Rng + ?Sized>(&mut self, x: &[f64], n: usize, rng: &mut R) -> SymMatrix {
        let mut h = self.hessian(x);
        h.add_scaled(1.0, &self.hessian_noise(n, rng));
        self.counters.hessian += n as u64;
        h
    }

    fn sample_gradient_difference<R: Rng + ?Sized>(
        &mut self,
        x: &[f64],
        y: &[f64],
        n: usize,
        _rng: &mut R,
    ) -> Vec<f64> {
        // shared additive noise cancels
        self.counters.gradient += n as u64;
        crate::linalg::sub(&self.gradient(x), &self.gradient(y))
    }

    fn sample_hessian_difference<R: Rng + ?Sized>(
        &mut self,
        x: &[f64],
        y: &[f64],
        n: usize,
        _rng: &mut R,
    ) -> SymMatrix {
        self.counters.hessian += n as u64;
        let mut h = self.hessian(x);
        h.add_scaled(-1.0, &self.hessian(y));
        h
    }

    fn counters(&self) -> SampleCounters {
        self.counters
    }

    fn constants(&self) -> ProblemConstants {
        self.constants
    }
}

/// `F(x) = Σᵢ |xᵢ|^{p/q}`, gradient dominant with `α = p/(p−q)`.
///
/// The reported Lipschitz constants hold on `[−1, 1]^d`; iterates are not
/// clamped to that box.
pub fn make_power_fn(spec: &SyntheticSpec) -> Result<SyntheticOracle, OracleError> {
    spec.validate()?;
    let SyntheticFamily::Power { p, q } = spec.family else {
        return Err(OracleError::BadSpec("expected the power family".into()));
    };
    let e = p as f64 / q as f64;
    let alpha = spec.alpha();
    let d = spec.dim as f64;
    // F/‖∇F‖^α = e^{-α} for one coordinate; separable sums lose d^{1-α/2}.
    let tau = e.powf(-alpha) * d.powf(1.0 - alpha / 2.0);
    let l1 = if e >= 2.0 { Some(e * (e - 1.0)) } else { None };
    let l2 = if e >= 3.0 {
        Some(e * (e - 1.0) * (e - 2.0))
    } else {
        None
    };
    Ok(SyntheticOracle {
        spec: *spec,
        scalar: Scalar::Power { exponent: e },
        constants: ProblemConstants {
            alpha: Some(alpha),
            tau: Some(tau),
            gradient_lipschitz: l1,
            hessian_lipschitz: l2,
            sample_gradient_lipschitz: l1,
            sample_hessian_lipschitz: l2,
        },
        counters: SampleCounters::default(),
    })
}

/// `F(x) = Σᵢ xᵢ² + a·sin²(xᵢ)`, gradient dominant with `α = 2`.
pub fn make_sin_quadratic_fn(spec: &SyntheticSpec) -> Result<SyntheticOracle, OracleError> {
    spec.validate()?;
    let SyntheticFamily::SinQuadratic { a } = spec.family else {
        return Err(OracleError::BadSpec(
            "expected the sin-quadratic family".into(),
        ));
    };
    let tau = if a < SIN_QUADRATIC_A_MAX {
        Some(sin_quadratic_tau(a))
    } else {
        None
    };
    Ok(SyntheticOracle {
        spec: *spec,
        scalar: Scalar::SinQuadratic { a },
        constants: ProblemConstants {
            alpha: Some(2.0),
            tau,
            gradient_lipschitz: Some(2.0 + 2.0 * a),
            hessian_lipschitz: Some(4.0 * a),
            sample_gradient_lipschitz: Some(2.0 + 2.0 * a),
            sample_hessian_lipschitz: Some(4.0 * a),
        },
        counters: SampleCounters::default(),
    })
}

/// Largest ratio `(F(x) − F*) / ‖∇F(x)‖^α` over the grid, skipping points
/// where the gradient vanishes.
pub fn estimate_pl_constant<O: StochasticOracle>(
    oracle: &O,
    alpha: f64,
    grid: &[Vec<f64>],
) -> Result<f64, OracleError> {
    if grid.is_empty() {
        return Err(OracleError::EmptyGrid);
    }
    let mut best = 0.0_f64;
    for x in grid {
        if x.len() != oracle.dim() {
            return Err(OracleError::DimMismatch {
                expected: oracle.dim(),
                got: x.len(),
            });
        }
        let gn = norm(&oracle.gradient(x));
        if gn < 1e-12 {
            continue;
        }
        best = best.max(oracle.gap(x) / gn.powf(alpha));
    }
    Ok(best)
}

/// Uniform one-dimensional grid of `n ≥ 2` points on `[lo, hi]`.
pub fn grid_1d(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
    assert!(n >= 2);
    (0..n)
        .map(|i| vec![lo + (hi - lo) * i as f64 / (n - 1) as f64])
        .collect()
}

fn sin_quadratic_ratio(a: f64, x: f64) -> f64 {
    let s = Scalar::SinQuadratic { a };
    let g = s.derivative(x);
    s.value(x) / (g * g)
}

/// τ_F of `x² + a·sin²(x)` for `α = 2`.
///
/// The ratio `F/F′²` tends to `1/(4(1+a))` at the origin and to `1/4` at
/// infinity; for large `a` its maximum sits near `|x| ≈ 2.24`. A dense scan
/// of `(0, 6]` is refined by golden-section search around the best cell.
pub fn sin_quadratic_tau(a: f64) -> f64 {
    let n = 6000;
    let h = 6.0 / n as f64;
    let (mut best_x, mut best) = (h, f64::NEG_INFINITY);
    for i in 1..=n {
        let x = i as f64 * h;
        let r = sin_quadratic_ratio(a, x);
        if r > best {
            best = r;
            best_x = x;
        }
    }
    let (mut lo, mut hi) = ((best_x - h).max(1e-9), best_x + h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = hi - phi * (hi - lo);
        let x2 = lo + phi * (hi - lo);
        if sin_quadratic_ratio(a, x1) < sin_quadratic_ratio(a, x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    best.max(sin_quadratic_ratio(a, 0.5 * (lo + hi))).max(0.25)
}

/// Smallest `a` whose τ_F reaches `target` (τ_F is increasing in `a`).
pub fn sin_quadratic_a_for_tau(target: f64) -> Result<f64, OracleError> {
    if target < 0.25 {
        return Err(OracleError::BadSpec(format!(
            "τ_F = {target} is below the minimum 1/4"
        )));
    }
    let (mut lo, mut hi) = (0.0, SIN_QUADRATIC_A_MAX);
    if sin_quadratic_tau(hi) < target {
        return Err(OracleError::BadSpec(format!(
            "τ_F = {target} not reachable with a ≤ {SIN_QUADRATIC_A_MAX}"
        )));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if sin_quadratic_tau(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
