//! Randomized checks of the cubic sub-problem solvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scrn_core::cubic::{solve_exact_reduced, solve_gd, CubicModel, GdOptions};
use scrn_core::linalg::{dot, SymMatrix};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub trials: usize,
    /// Exact solutions violating a first- or second-order condition.
    pub exact_violations: usize,
    /// Solutions (either solver) with positive model value or `gᵀΔ > 1e-10`.
    pub side_violations: usize,
    pub gd_converged: usize,
    /// GD solutions within `1e-4` of the exact model value.
    pub gd_close: usize,
    pub worst_first_order: f64,
}

/// Model with entries uniform on `[−2, 2]` and `M` drawn from `{1, 3, 10}`.
pub fn random_model(dim: usize, rng: &mut impl Rng) -> CubicModel {
    let g = (0..dim).map(|_| rng.random_range(-2.0..=2.0)).collect();
    let mut h = SymMatrix::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            h.set(i, j, rng.random_range(-2.0..=2.0));
        }
    }
    let m = [1.0, 3.0, 10.0][rng.random_range(0..3)];
    CubicModel::new(g, h, m).expect("valid random model")
}

pub fn subsolver_bench(dim: usize, trials: usize, seed: u64) -> BenchReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = BenchReport {
        trials,
        ..BenchReport::default()
    };
    for _ in 0..trials {
        let model = random_model(dim, &mut rng);
        let gnorm = dot(&model.g, &model.g).sqrt();
        let exact = match solve_exact_reduced(&model, dim) {
            Ok(s) => s,
            Err(_) => {
                report.exact_violations += 1;
                continue;
            }
        };
        let rel = exact.grad_residual / gnorm.max(1.0);
        report.worst_first_order = report.worst_first_order.max(rel);
        if rel > 1e-8 || exact.min_eig_residual.is_some_and(|r| r < -1e-8) {
            report.exact_violations += 1;
        }
        let gd = solve_gd(&model, &GdOptions::default(), &mut rng);
        let side_ok = |v: f64, d: &[f64]| v <= 0.0 && dot(&model.g, d) <= 1e-10;
        if !side_ok(exact.model_value, &exact.delta) {
            report.side_violations += 1;
        }
        match gd {
            Ok(gd) => {
                if !side_ok(gd.model_value, &gd.delta) {
                    report.side_violations += 1;
                }
                report.gd_converged += usize::from(gd.converged);
                report.gd_close += usize::from(gd.model_value <= exact.model_value + 1e-4);
            }
            Err(_) => report.side_violations += 1,
        }
    }
    report
}
