//! Reference computations that share no code with the library: a dense
//! grid-and-polish cubic minimizer, exhaustive trajectory enumeration for
//! tiny MDPs, and finite differences.

#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scrn_core::cubic::CubicModel;
use scrn_core::linalg::SymMatrix;
use scrn_core::rl::TabularMdp;

pub const MODEL_DIMS: [usize; 4] = [1, 2, 3, 5];
pub const MODEL_PENALTIES: [f64; 3] = [1.0, 3.0, 10.0];

/// Dense random cubic model as plain rows.
#[derive(Debug, Clone)]
pub struct RawModel {
    pub g: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub m: f64,
}

impl RawModel {
    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn to_model(&self) -> CubicModel {
        let d = self.dim();
        let flat: Vec<f64> = self.h.iter().flatten().copied().collect();
        let h = SymMatrix::from_row_major(d, flat).unwrap();
        CubicModel::new(self.g.clone(), h, self.m).unwrap()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut v = 0.0;
        for i in 0..d {
            v += self.g[i] * x[i];
            for j in 0..d {
                v += 0.5 * x[i] * self.h[i][j] * x[j];
            }
        }
        v + self.m / 6.0 * norm(x).powi(3)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let r = norm(x);
        (0..d)
            .map(|i| {
                let hx: f64 = (0..d).map(|j| self.h[i][j] * x[j]).sum();
                self.g[i] + hx + 0.5 * self.m * r * x[i]
            })
            .collect()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        let d = self.dim();
        let a = DMatrix::from_fn(d, d, |i, j| self.h[i][j]);
        SymmetricEigen::new(a).eigenvalues.iter().copied().collect()
    }

    pub fn h_min_eig_shifted(&self, shift: f64) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min) + shift
    }

    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.h.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Radius containing every global minimizer: at a minimizer
    /// `(M/2)r³ = −gᵀΔ − ΔᵀHΔ ≤ ‖g‖r + ‖H‖r²`.
    pub fn radius(&self) -> f64 {
        let (hn, gn) = (self.operator_norm(), norm(&self.g));
        (hn + (hn * hn + 2.0 * self.m * gn).sqrt()) / self.m
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `count` models cycling through the dimension and penalty grids, entries
/// uniform on `[−2, 2]`.
pub fn random_models(count: usize, seed: u64) -> Vec<RawModel> {
    (0..count)
        .map(|i| {
            let d = MODEL_DIMS[i % MODEL_DIMS.len()];
            let m = MODEL_PENALTIES[(i / MODEL_DIMS.len()) % MODEL_PENALTIES.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let g = (0..d).map(|_| rng.random_range(-2.0..=2.0)).collect();
            let mut h = vec![vec![0.0; d]; d];
            for i in 0..d {
                for j in i..d {
                    let v = rng.random_range(-2.0..=2.0);
                    h[i][j] = v;
                    h[j][i] = v;
                }
            }
            RawModel { g, h, m }
        })
        .collect()
}

/// Global minimum of a one- or two-dimensional model: best of a 201-point
/// (per axis) grid over the minimizer ball's bounding box, refined by
/// backtracking gradient descent.
pub fn brute_force_min(model: &RawModel) -> f64 {
    let d = model.dim();
    assert!(d <= 2, "grid search only for d ≤ 2");
    let r = model.radius();
    let axis: Vec<f64> = (0..=200).map(|k| -r + 2.0 * r * k as f64 / 200.0).collect();
    let mut best = (f64::INFINITY, vec![0.0; d]);
    let mut consider = |x: Vec<f64>| {
        let v = model.value(&x);
        if v < best.0 {
            best = (v, x);
        }
    };
    if d == 1 {
        for &a in &axis {
            consider(vec![a]);
        }
    } else {
        for &a in &axis {
            for &b in &axis {
                consider(vec![a, b]);
            }
        }
    }
    polish(model, best.1)
}

fn polish(model: &RawModel, mut x: Vec<f64>) -> f64 {
    let mut fx = model.value(&x);
    for _ in 0..5000 {
        let g = model.gradient(&x);
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        if gn2 < 1e-28 {
            break;
        }
        let mut t = 1.0;
        loop {
            let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            let fy = model.value(&y);
            if fy <= fx - 0.25 * t * gn2 {
                x = y;
                fx = fy;
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                return fx;
            }
        }
    }
    fx
}

/// Symmetric finite-difference Jacobian of `f` at `x`.
pub fn fd_jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: F, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut xp = x.to_vec();
        xp[j] += h;
        let mut xm = x.to_vec();
        xm[j] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        cols.push(
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    let m = cols[0].len();
    (0..m)
        .map(|i| (0..n).map(|j| cols[j][i]).collect())
        .collect()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let mx = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// A fully enumerated trajectory: probability, discounted return and the
/// summed score `Σ_h ∇log π(a_h|s_h)`.
pub struct EnumeratedPath {
    pub prob: f64,
    pub ret: f64,
    pub score: Vec<f64>,
}

/// Every trajectory of `mdp` under the softmax policy with logits `theta`.
pub fn enumerate_paths(mdp: &TabularMdp, theta: &[f64]) -> Vec<EnumeratedPath> {
    let k = mdp.n_actions();
    let d = theta.len();
    let mut out = Vec::new();
    let mut stack: Vec<(usize, usize, f64, f64, Vec<f64>)> = Vec::new();
    for (s, &p) in mdp.start_dist().iter().enumerate() {
        if p > 0.0 {
            stack.push((s, 0, p, 0.0, vec![0.0; d]));
        }
    }
    while let Some((s, h, prob, ret, score)) = stack.pop() {
        if h == mdp.horizon() || mdp.is_terminal(s) {
            out.push(EnumeratedPath { prob, ret, score });
            continue;
        }
        let pi = softmax(&theta[s * k..(s + 1) * k]);
        let disc = mdp.discount().powi(h as i32);
        for a in 0..k {
            let mut sc = score.clone();
            for b in 0..k {
                sc[s * k + b] += if a == b { 1.0 } else { 0.0 } - pi[b];
            }
            let r = ret + disc * mdp.reward(s, a);
            for &(s2, q) in mdp.transitions(s, a) {
                if q > 0.0 {
                    stack.push((s2, h + 1, prob * pi[a] * q, r, sc.clone()));
                }
            }
        }
    }
    out
}

pub fn enumerated_return(mdp: &TabularMdp, theta: &[f64]) -> f64 {
    enumerate_paths(mdp, theta)
        .iter()
        .map(|p| p.prob * p.ret)
        .sum()
}

/// `∇J_H = Σ_τ p(τ) R(τ) ∇log p(τ)` over all trajectories.
pub fn enumerated_gradient(mdp: &TabularMdp, theta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    for p in enumerate_paths(mdp, theta) {
        for (gi, si) in g.iter_mut().zip(&p.score) {
            *gi += p.prob * p.ret * si;
        }
    }
    g
}

/// `∇²J_H` by central differences of the enumerated gradient.
pub fn enumerated_hessian(mdp: &TabularMdp, theta: &[f64]) -> Vec<Vec<f64>> {
    fd_jacobian(|t| enumerated_gradient(mdp, t), theta, 1e-5)
}

/// Three states, two actions, stochastic transitions, state 2 absorbing.
pub fn three_state_mdp(horizon: usize) -> TabularMdp {
    let transitions = vec![
        vec![(0, 0.3), (1, 0.7)],
        vec![(1, 0.5), (2, 0.5)],
        vec![(0, 0.6), (1, 0.2), (2, 0.2)],
        vec![(2, 1.0)],
        vec![(2, 1.0)],
        vec![(2, 1.0)],
    ];
    let reward = vec![1.0, -0.5, 0.2, 2.0, 0.0, 0.0];
    TabularMdp::new(
        3,
        2,
        transitions,
        reward,
        vec![0.6, 0.4, 0.0],
        0.9,
        horizon,
        vec![false, false, true],
        vec![false, false, true],
    )
    .unwrap()
}

/// Two states, two actions, no terminal state.
pub fn two_state_mdp(horizon: usize) -> TabularMdp {
    let transitions = vec![
        vec![(0, 0.8), (1, 0.2)],
        vec![(0, 0.1), (1, 0.9)],
        vec![(0, 0.5), (1, 0.5)],
        vec![(1, 1.0)],
    ];
    TabularMdp::new(
        2,
        2,
        transitions,
        vec![0.5, -1.0, 1.5, 0.3],
        vec![0.7, 0.3],
        0.8,
        horizon,
        vec![false, false],
        vec![false, false],
    )
    .unwrap()
}
