mod common;

use common::{brute_force_min, fd_jacobian, norm, random_models, RawModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scrn_core::cubic::{
    cauchy_radius, gd_trace, model_eval, solve_exact, solve_gd, step_norm_bound, CubicModel,
    GdOptions,
};
use scrn_core::linalg::{operator_norm, SymMatrix};

fn raw_model() -> impl Strategy<Value = RawModel> {
    (1usize..=4, 0.2f64..20.0).prop_flat_map(|(d, m)| {
        (
            prop::collection::vec(-3.0f64..3.0, d),
            prop::collection::vec(-3.0f64..3.0, d * d),
        )
            .prop_map(move |(g, raw)| {
                let h = (0..d)
                    .map(|i| {
                        (0..d)
                            .map(|j| 0.5 * (raw[i * d + j] + raw[j * d + i]))
                            .collect()
                    })
                    .collect();
                RawModel { g, h, m }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exact_solution_is_a_global_minimizer(raw in raw_model()) {
        let model = raw.to_model();
        let sol = solve_exact(&model).unwrap();
        let gn = norm(&raw.g);
        prop_assert!(sol.model_value <= 0.0);
        prop_assert!(sol.grad_residual <= 1e-8 * gn.max(1.0));
        let r = sol.step_norm();
        prop_assert!(raw.h_min_eig_shifted(raw.m * r / 2.0) >= -1e-8);
        let gd: f64 = raw.g.iter().zip(&sol.delta).map(|(a, b)| a * b).sum();
        prop_assert!(gd <= 1e-10);
    }

    #[test]
    fn exact_minimizer_is_scale_invariant(raw in raw_model(), c in 0.05f64..20.0) {
        let base = solve_exact(&raw.to_model()).unwrap();
        let scaled = RawModel {
            g: raw.g.iter().map(|v| c * v).collect(),
            h: raw.h.iter().map(|row| row.iter().map(|v| c * v).collect()).collect(),
            m: c * raw.m,
        };
        let other = solve_exact(&scaled.to_model()).unwrap();
        for (a, b) in base.delta.iter().zip(&other.delta) {
            prop_assert!((a - b).abs() <= 1e-7 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn model_gradient_matches_finite_differences(raw in raw_model(), seed in any::<u64>()) {
        use rand::Rng;
        let model = raw.to_model();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..raw.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
        let (value, grad) = model_eval(&model, &x).unwrap();
        prop_assert!((value - raw.value(&x)).abs() <= 1e-10 * (1.0 + value.abs()));
        let fd = fd_jacobian(|y| vec![raw.value(y)], &x, 1e-5);
        for (j, g) in grad.iter().enumerate() {
            prop_assert!((fd[0][j] - g).abs() <= 1e-6 * (1.0 + g.abs()));
        }
    }

    #[test]
    fn cauchy_radius_is_below_the_step_bound(raw in raw_model()) {
        prop_assume!(norm(&raw.g) > 1e-6);
        let model = raw.to_model();
        let rc = cauchy_radius(&model).unwrap();
        let r = step_norm_bound(&model, operator_norm(&model.h).unwrap());
        prop_assert!(rc > 0.0);
        prop_assert!(rc <= r * (1.0 + 1e-12));
    }

    #[test]
    fn gd_never_increases_the_model(raw in raw_model()) {
        prop_assume!(norm(&raw.g) > 1e-6);
        let model = raw.to_model();
        let trace = gd_trace(&model, 300).unwrap();
        prop_assert!(trace[0].1 <= 0.0);
        for w in trace.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 + 1e-12 * w[0].1.abs().max(1.0));
        }
        let sol = solve_gd(&model, &GdOptions::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        prop_assert!(sol.model_value <= 0.0);
    }
}

#[test]
fn exact_solver_matches_brute_force_on_small_models() {
    for raw in random_models(120, 41).into_iter().filter(|r| r.dim() <= 2) {
        let sol = solve_exact(&raw.to_model()).unwrap();
        let brute = brute_force_min(&raw);
        assert!(
            sol.model_value <= brute + 1e-4,
            "{} vs {brute}",
            sol.model_value
        );
    }
}

#[test]
fn indefinite_example_matches_brute_force() {
    let raw = RawModel {
        g: vec![1.0, 0.0],
        h: vec![vec![1.0, 0.0], vec![0.0, -1.0]],
        m: 3.0,
    };
    let sol = solve_exact(&raw.to_model()).unwrap();
    let brute = brute_force_min(&raw);
    assert!(
        (sol.model_value - brute).abs() <= 1e-4,
        "{} vs {brute}",
        sol.model_value
    );
}

#[test]
fn gd_is_close_to_exact_on_five_dimensional_models() {
    let mut close = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for raw in random_models(80, 77).into_iter().filter(|r| r.dim() == 5) {
        let model = raw.to_model();
        let exact = solve_exact(&model).unwrap();
        let gd = solve_gd(&model, &GdOptions::default(), &mut rng).unwrap();
        close += usize::from(gd.model_value <= exact.model_value + 1e-4);
    }
    assert!(close >= 18, "{close}/20");
}

#[test]
fn gd_recovers_the_pure_cubic_solution() {
    let model = CubicModel::new(vec![1.0, 0.0], SymMatrix::zeros(2), 2.0).unwrap();
    let opts = GdOptions {
        tol: 1e-8,
        ..GdOptions::default()
    };
    let sol = solve_gd(&model, &opts, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(sol.converged);
    assert!((sol.delta[0] + 1.0).abs() < 1e-7 && sol.delta[1].abs() < 1e-12);
}
