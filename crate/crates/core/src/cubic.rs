//! Cubic-regularized model sub-problem
//!
//! ```text
//! m(Δ) = gᵀΔ + ½ ΔᵀHΔ + (M/6)‖Δ‖³
//! ```
//!
//! [`solve_exact`] returns the global minimizer through an eigendecomposition
//! of `H` and a scalar secular equation; [`solve_gd`] runs gradient descent
//! from the Cauchy point and only certifies `‖∇m(Δ)‖ ≤ tol`.
//!
//! The global minimizer is characterised by
//! `(H + σI)Δ = −g`, `H + σI ⪰ 0`, `σ = M‖Δ‖/2`.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{self, dot, eigen_decompose, norm, EigDecomposition, LinalgError, SymMatrix};

/// Largest dimension [`solve_exact`] accepts by default.
pub const DEFAULT_EXACT_DIM_CAP: usize = 64;

const ROOT_TOL: f64 = 1e-12;
const ROOT_MAX_ITERS: usize = 200;
const POLISH_STEPS: usize = 3;
const PERTURBATION: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CubicError {
    #[error("gradient has length {got}, Hessian has dimension {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("dimension {dim} exceeds the exact-solver cap {cap}")]
    DimTooLarge { dim: usize, cap: usize },
    #[error("gradient norm is zero")]
    ZeroGradient,
    #[error("non-finite value in the cubic model or its solution")]
    NonFinite,
    #[error("cubic penalty must be positive and finite, got {0}")]
    InvalidPenalty(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, CubicError>;

#[derive(Debug, Clone, PartialEq)]
pub struct CubicModel {
    pub g: Vec<f64>,
    pub h: SymMatrix,
    pub m_penalty: f64,
}

impl CubicModel {
    pub fn new(g: Vec<f64>, h: SymMatrix, m_penalty: f64) -> Result<Self> {
        if g.len() != h.dim() {
            return Err(CubicError::DimMismatch {
                expected: h.dim(),
                got: g.len(),
            });
        }
        if !(m_penalty > 0.0 && m_penalty.is_finite()) {
            return Err(CubicError::InvalidPenalty(m_penalty));
        }
        if !linalg::all_finite(&g) || !h.is_finite() {
            return Err(CubicError::NonFinite);
        }
        Ok(Self { g, h, m_penalty })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// Coordinates that interact with the model. A coordinate whose gradient
    /// entry and Hessian row are both zero only enters through the cubic
    /// penalty, so the minimizer leaves it at zero.
    pub fn active_coordinates(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.g[i] != 0.0 || self.h.row(i).iter().any(|&v| v != 0.0))
            .collect()
    }

    /// The model restricted to `idx`.
    pub fn restrict(&self, idx: &[usize]) -> CubicModel {
        CubicModel {
            g: idx.iter().map(|&i| self.g[i]).collect(),
            h: self.h.submatrix(idx),
            m_penalty: self.m_penalty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Exact,
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSolution {
    pub delta: Vec<f64>,
    pub model_value: f64,
    /// `‖∇m(Δ)‖`
    pub grad_residual: f64,
    /// `λ_min(H) + M‖Δ‖/2`; nonnegative at a global minimizer. Only computed
    /// when an eigendecomposition of `H` is available.
    pub min_eig_residual: Option<f64>,
    pub iterations: usize,
    pub method: SolveMethod,
    /// False when the iteration budget ran out before the tolerance was met.
    pub converged: bool,
}

impl CubicSolution {
    pub fn step_norm(&self) -> f64 {
        norm(&self.delta)
    }
}

/// Value and gradient of the model at `delta`.
pub fn model_eval(model: &CubicModel, delta: &[f64]) -> Result<(f64, Vec<f64>)> {
    if delta.len() != model.dim() {
        return Err(CubicError::DimMismatch {
            expected: model.dim(),
            got: delta.len(),
        });
    }
    Ok(eval_unchecked(model, delta))
}

fn eval_unchecked(model: &CubicModel, delta: &[f64]) -> (f64, Vec<f64>) {
    let r = norm(delta);
    let hd = model.h.mul_vec(delta);
    let value = dot(&model.g, delta) + 0.5 * dot(delta, &hd) + model.m_penalty / 6.0 * r.powi(3);
    let mut grad = hd;
    linalg::axpy(1.0, &model.g, &mut grad);
    linalg::axpy(0.5 * model.m_penalty * r, delta, &mut grad);
    (value, grad)
}

/// Global minimizer with the default dimension cap.
pub fn solve_exact(model: &CubicModel) -> Result<CubicSolution> {
    solve_exact_capped(model, DEFAULT_EXACT_DIM_CAP)
}

pub fn solve_exact_capped(model: &CubicModel, dim_cap: usize) -> Result<CubicSolution> {
    if model.dim() > dim_cap {
        return Err(CubicError::DimTooLarge {
            dim: model.dim(),
            cap: dim_cap,
        });
    }
    let eig = eigen_decompose(&model.h)?;
    solve_with_eig(model, &eig)
}

/// Solves the sub-problem on the active coordinates only and scatters the
/// result back. The cap applies to the number of active coordinates.
pub fn solve_exact_reduced(model: &CubicModel, dim_cap: usize) -> Result<CubicSolution> {
    let idx = model.active_coordinates();
    if idx.len() == model.dim() {
        return solve_exact_capped(model, dim_cap);
    }
    let n = model.dim();
    if idx.is_empty() {
        return Ok(CubicSolution {
            delta: vec![0.0; n],
            model_value: 0.0,
            grad_residual: 0.0,
            min_eig_residual: Some(0.0),
            iterations: 0,
            method: SolveMethod::Exact,
            converged: true,
        });
    }
    let mut sol = solve_exact_capped(&model.restrict(&idx), dim_cap)?;
    let mut delta = vec![0.0; n];
    for (k, &i) in idx.iter().enumerate() {
        delta[i] = sol.delta[k];
    }
    sol.delta = delta;
    // inactive block of H is zero, so λ_min(H) ≤ 0 there
    sol.min_eig_residual = sol
        .min_eig_residual
        .map(|r| r.min(0.5 * model.m_penalty * norm(&sol.delta)));
    Ok(sol)
}

fn solve_with_eig(model: &CubicModel, eig: &EigDecomposition) -> Result<CubicSolution> {
    let m = model.m_penalty;
    let lam = &eig.eigenvalues;
    let lam_min = eig.min_eigenvalue();
    let gt = eig.project(&model.g);
    let gnorm = norm(&model.g);
    let sigma_lo = (-lam_min).max(0.0);

    let lam_scale = lam.iter().fold(1.0_f64, |acc, l| acc.max(l.abs()));
    let near: Vec<usize> = (0..lam.len())
        .filter(|&i| lam[i] - lam_min <= 1e-10 * lam_scale)
        .collect();
    let g_near = near.iter().map(|&i| gt[i] * gt[i]).sum::<f64>().sqrt();

    let mut iterations = 0;
    let mut coords: Vec<f64>;

    let hard_case = sigma_lo > 0.0 && g_near <= 1e-10 * gnorm.max(1.0) && {
        let rest = norm_excluding(&gt, lam, sigma_lo, &near);
        rest <= 2.0 * sigma_lo / m
    };

    if hard_case {
        let mut y = vec![0.0; lam.len()];
        for i in 0..lam.len() {
            if !near.contains(&i) {
                y[i] = -gt[i] / (lam[i] + sigma_lo);
            }
        }
        let target = 2.0 * sigma_lo / m;
        let rest = norm(&y);
        let tau = (target * target - rest * rest).max(0.0).sqrt();
        let k = near[0];
        // choose the sign that keeps gᵀΔ ≤ 0
        y[k] = if gt[k] > 0.0 { -tau } else { tau };
        coords = y;
    } else if gnorm == 0.0 {
        coords = vec![0.0; lam.len()];
    } else {
        let (sigma, its) = secular_root(&gt, lam, m, sigma_lo);
        iterations = its;
        coords = (0..lam.len()).map(|i| -gt[i] / (lam[i] + sigma)).collect();
    }
    if !linalg::all_finite(&coords) {
        return Err(CubicError::NonFinite);
    }

    polish(&gt, lam, m, &mut coords);

    let delta = eig.unproject(&coords);
    let (value, grad) = eval_unchecked(model, &delta);
    if !value.is_finite() {
        return Err(CubicError::NonFinite);
    }
    let r = norm(&delta);
    Ok(CubicSolution {
        model_value: value,
        grad_residual: norm(&grad),
        min_eig_residual: Some(lam_min + 0.5 * m * r),
        delta,
        iterations,
        method: SolveMethod::Exact,
        converged: true,
    })
}

fn norm_excluding(gt: &[f64], lam: &[f64], sigma: f64, skip: &[usize]) -> f64 {
    (0..lam.len())
        .filter(|i| !skip.contains(i))
        .map(|i| (gt[i] / (lam[i] + sigma)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Root of `φ(σ) = 1/‖Δ(σ)‖ − M/(2σ)` on `σ > sigma_lo`, where
/// `Δ(σ)ᵢ = −g̃ᵢ/(λᵢ + σ)`. `φ` is increasing and concave there, so Newton
/// steps taken from the left approach the root monotonically; bisection
/// guards steps that leave the bracket.
fn secular_root(gt: &[f64], lam: &[f64], m: f64, sigma_lo: f64) -> (f64, usize) {
    let phi = |s: f64| -> (f64, f64) {
        let mut p2 = 0.0;
        let mut p3 = 0.0;
        for (g, l) in gt.iter().zip(lam) {
            let d = l + s;
            p2 += (g / d).powi(2);
            p3 += g * g / (d * d * d);
        }
        let psi = p2.sqrt();
        (
            1.0 / psi - m / (2.0 * s),
            p3 / (psi * p2) + m / (2.0 * s * s),
        )
    };

    let gnorm = norm(gt);
    let mut lo = sigma_lo;
    let lam_min = lam.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = sigma_lo + lam_min.abs() + (0.5 * m * gnorm).sqrt() + 1.0;
    while phi(hi).0 < 0.0 {
        lo = hi;
        hi *= 2.0;
    }

    let mut s = 0.5 * (lo + hi);
    let mut iters = 0;
    while iters < ROOT_MAX_ITERS {
        iters += 1;
        let (f, df) = phi(s);
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let tol = ROOT_TOL * s.max(1.0);
        if hi - lo <= tol {
            break;
        }
        let newton = s - f / df;
        if newton.is_finite() && newton > lo && newton < hi {
            let step = (newton - s).abs();
            s = newton;
            if step <= tol {
                break;
            }
        } else {
            s = 0.5 * (lo + hi);
        }
    }
    (s, iters)
}

/// Newton steps on `F(y) = g̃ + Λy + (M/2)‖y‖y` in eigen-coordinates, kept
/// only when they reduce the residual.
fn polish(gt: &[f64], lam: &[f64], m: f64, y: &mut [f64]) {
    let n = y.len();
    let residual = |y: &[f64]| -> Vec<f64> {
        let r = norm(y);
        (0..n)
            .map(|i| gt[i] + lam[i] * y[i] + 0.5 * m * r * y[i])
            .collect()
    };
    let mut f = residual(y);
    let mut fnorm = norm(&f);
    for _ in 0..POLISH_STEPS {
        let r = norm(y);
        if fnorm == 0.0 || r == 0.0 {
            return;
        }
        // J = D + c yyᵀ with D = Λ + (M r/2)I, c = M/(2r)
        let d: Vec<f64> = lam.iter().map(|l| l + 0.5 * m * r).collect();
        if d.iter().any(|&v| v.abs() < 1e-14) {
            return;
        }
        let c = 0.5 * m / r;
        let dinv_f: Vec<f64> = (0..n).map(|i| f[i] / d[i]).collect();
        let dinv_y: Vec<f64> = (0..n).map(|i| y[i] / d[i]).collect();
        let denom = 1.0 + c * dot(y, &dinv_y);
        if denom.abs() < 1e-14 {
            return;
        }
        let coef = c * dot(y, &dinv_f) / denom;
        let candidate: Vec<f64> = (0..n)
            .map(|i| y[i] - (dinv_f[i] - coef * dinv_y[i]))
            .collect();
        let fc = residual(&candidate);
        let fc_norm = norm(&fc);
        if !(fc_norm < fnorm) {
            return;
        }
        y.copy_from_slice(&candidate);
        f = fc;
        fnorm = fc_norm;
    }
}

/// Minimizer of the model along `−g`.
pub fn cauchy_radius(model: &CubicModel) -> Result<f64> {
    let gnorm = norm(&model.g);
    if gnorm <= 1e-14 {
        return Err(CubicError::ZeroGradient);
    }
    // positive root of (M/2) r² + κ r − ‖g‖ with κ = ĝᵀHĝ
    let m = model.m_penalty;
    let curv = model.h.quad_form(&model.g) / (m * gnorm * gnorm);
    Ok(-curv + (2.0 * gnorm / m + curv * curv).sqrt())
}

/// Upper bound `R` on the norm of any global minimizer and of every
/// gradient-descent iterate started inside the Cauchy radius: the positive
/// root of `(M/2) r² − ‖H‖ r − ‖g‖`.
pub fn step_norm_bound(model: &CubicModel, h_norm: f64) -> f64 {
    let m = model.m_penalty;
    let a = h_norm / m;
    a + (a * a + 2.0 * norm(&model.g) / m).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Perturb the gradient by a random vector of norm 1e-8 before
    /// descending, which lets the iteration escape the strict saddle at the
    /// origin when `g = 0`.
    pub perturb: bool,
}

impl Default for GdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 100_000,
            perturb: false,
        }
    }
}

/// Gradient descent on the model from the Cauchy point with the constant
/// step `1/(4(‖H‖ + M R))`.
///
/// With `g = 0` and no perturbation the origin is returned immediately.
pub fn solve_gd<R: Rng + ?Sized>(
    model: &CubicModel,
    opts: &GdOptions,
    rng: &mut R,
) -> Result<CubicSolution> {
    if !(opts.tol > 0.0) {
        return Err(CubicError::NonFinite);
    }
    let n = model.dim();
    let h_norm = if n <= linalg::JACOBI_MAX_DIM {
        linalg::operator_norm(&model.h)?
    } else {
        // cheap upper bound keeps the step size admissible
        model.h.frobenius_norm()
    };

    let perturbed;
    let model = if opts.perturb {
        let mut u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let un = norm(&u);
        if un > 0.0 {
            u.iter_mut().for_each(|v| *v *= PERTURBATION / un);
        }
        perturbed = CubicModel {
            g: linalg::add(&model.g, &u),
            h: model.h.clone(),
            m_penalty: model.m_penalty,
        };
        &perturbed
    } else {
        model
    };

    if norm(&model.g) <= 1e-14 {
        return Ok(CubicSolution {
            delta: vec![0.0; n],
            model_value: 0.0,
            grad_residual: norm(&model.g),
            min_eig_residual: None,
            iterations: 0,
            method: SolveMethod::GradientDescent,
            converged: true,
        });
    }

    let radius = step_norm_bound(model, h_norm);
    let eta = 1.0 / (4.0 * (h_norm + model.m_penalty * radius));
    let rc = cauchy_radius(model)?;
    let gnorm = norm(&model.g);
    let mut delta = linalg::scaled(-rc / gnorm, &model.g);
    let (mut value, mut grad) = eval_unchecked(model, &delta);
    let mut iterations = 0;
    let mut converged = norm(&grad) <= opts.tol;
    while !converged && iterations < opts.max_iters {
        linalg::axpy(-eta, &grad, &mut delta);
        let (v, gr) = eval_unchecked(model, &delta);
        value = v;
        grad = gr;
        iterations += 1;
        converged = norm(&grad) <= opts.tol;
    }
    if !value.is_finite() || !linalg::all_finite(&delta) {
        return Err(CubicError::NonFinite);
    }
    Ok(CubicSolution {
        grad_residual: norm(&grad),
        model_value: value,
        delta,
        min_eig_residual: None,
        iterations,
        method: SolveMethod::GradientDescent,
        converged,
    })
}

/// Iterates of [`solve_gd`] without a tolerance, for inspecting the descent
/// path. Returns `(Δ_k, m(Δ_k))` for `k = 0..=iters`.
pub fn gd_trace(model: &CubicModel, iters: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let h_norm = linalg::operator_norm(&model.h)?;
    let radius = step_norm_bound(model, h_norm);
    let eta = 1.0 / (4.0 * (h_norm + model.m_penalty * radius));
    let rc = cauchy_radius(model)?;
    let mut delta = linalg::scaled(-rc / norm(&model.g), &model.g);
    let mut out = Vec::with_capacity(iters + 1);
    for _ in 0..=iters {
        let (v, grad) = eval_unchecked(model, &delta);
        out.push((delta.clone(), v));
        linalg::axpy(-eta, &grad, &mut delta);
    }
    Ok(out)
}
