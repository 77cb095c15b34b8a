use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scrn_core::optimizers::{
    crn_run, default_penalty, scrn_run, sgd_run, vr_scrn_run, RecursionConstants, RunStatus,
    ScrnConfig, StepSchedule, Subsolver, VrBatchRule, VrScrnConfig,
};
use scrn_core::oracle::{sin_quadratic_tau, StochasticOracle, SyntheticSpec};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn noisy_power() -> SyntheticSpec {
    SyntheticSpec::power(4, 1).with_noise(0.1, 0.1)
}

fn penalty(spec: &SyntheticSpec) -> f64 {
    default_penalty(spec.build().unwrap().constants().hessian_lipschitz.unwrap())
}

fn vr_config(m: f64, iters: usize) -> VrScrnConfig {
    let mut base = ScrnConfig::new(m, 1, 1, iters);
    base.stop_on_small_step = false;
    VrScrnConfig {
        base,
        period: 10,
        batch_cap: 10_000,
        batches: VrBatchRule::Adaptive {
            multiplier: 1.0,
            epoch_error_exponent: 2.0,
            sigma1: 0.1,
            sigma2: 0.1,
            sample_gradient_lipschitz: None,
            sample_hessian_lipschitz: None,
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_are_bit_identical_under_a_fixed_seed(seed in any::<u64>(), n in 1usize..50, x0 in -1.0f64..1.0) {
        let spec = noisy_power();
        let cfg = ScrnConfig::new(penalty(&spec), n, n, 15);
        let run = |f: &dyn Fn(&mut ChaCha8Rng) -> scrn_core::optimizers::OptRunRecord| {
            f(&mut ChaCha8Rng::seed_from_u64(seed))
        };
        let scrn = |rng: &mut ChaCha8Rng| scrn_run(&mut spec.build().unwrap(), &cfg, &[x0], rng).unwrap();
        prop_assert_eq!(run(&scrn), run(&scrn));
        let vr = vr_config(cfg.m_penalty, 15);
        let vrr = |rng: &mut ChaCha8Rng| vr_scrn_run(&mut spec.build().unwrap(), &vr, &[x0], rng).unwrap();
        prop_assert_eq!(run(&vrr), run(&vrr));
        let sched = StepSchedule::new(0.3, 1.0, 1, 0.5);
        let sgd = |rng: &mut ChaCha8Rng| sgd_run(&mut spec.build().unwrap(), &sched, n, &[x0], 15, None, rng).unwrap();
        prop_assert_eq!(run(&sgd), run(&sgd));
    }

    #[test]
    fn sample_counters_sum_batches_including_rejected_steps(
        seed in any::<u64>(),
        n1 in 1usize..40,
        n2 in 1usize..40,
        iters in 1usize..30,
        threshold in 0.01f64..0.5,
    ) {
        let spec = noisy_power();
        let mut cfg = ScrnConfig::new(penalty(&spec), n1, n2, iters);
        cfg.delta_reject_threshold = Some(threshold);
        let mut oracle = spec.build().unwrap();
        let rec = scrn_run(&mut oracle, &cfg, &[0.9], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let steps = (rec.rows.len() - 1) as u64;
        prop_assert_eq!(rec.total_grad_samples(), steps * n1 as u64);
        prop_assert_eq!(rec.rows.last().unwrap().hess_samples, steps * n2 as u64);
        let c = oracle.counters();
        prop_assert_eq!((c.gradient, c.hessian), (steps * n1 as u64, steps * n2 as u64));
        for w in rec.rows.windows(2) {
            prop_assert!(w[1].grad_samples >= w[0].grad_samples);
            prop_assert!(w[1].hess_samples >= w[0].hess_samples);
            if w[1].rejected {
                prop_assert_eq!(w[1].gap.to_bits(), w[0].gap.to_bits());
            }
        }
    }

    #[test]
    fn accepted_steps_satisfy_the_subproblem_side_conditions(seed in any::<u64>(), x0 in -1.0f64..1.0, gd in any::<bool>()) {
        let spec = noisy_power().with_dim(3);
        let mut cfg = ScrnConfig::new(penalty(&spec), 5, 5, 20);
        if gd {
            cfg.subsolver = Subsolver::Gd { tol: 1e-8, max_iters: 10_000, perturb: false };
        }
        let rec = scrn_run(&mut spec.build().unwrap(), &cfg, &[x0, -0.5 * x0, 0.3], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for row in rec.rows.iter().skip(1).filter(|r| !r.rejected) {
            prop_assert!(row.model_value <= 0.0);
            prop_assert!(row.g_dot_delta <= 1e-10);
        }
    }
}

/// `F(x_{t+1}) − F* ≤ C (F(x_t) − F(x_{t+1}))^{2α/3}` along noiseless runs.
#[test]
fn one_step_recursion_holds_without_noise() {
    let cases = [
        (SyntheticSpec::power(4, 1), vec![0.95, 0.4, 0.1, 0.01]),
        (SyntheticSpec::power(6, 1), vec![0.9, -0.5]),
        (SyntheticSpec::sin_quadratic(2.0), vec![0.9, -0.7]),
    ];
    for (spec, starts) in cases {
        let probe = spec.build().unwrap();
        let k = probe.constants();
        let l2 = k.hessian_lipschitz.unwrap();
        let alpha = spec.alpha();
        let m = default_penalty(l2);
        let c = RecursionConstants::from_problem(alpha, k.tau.unwrap(), m, l2, 1)
            .unwrap()
            .c;
        for x0 in starts {
            let cfg = ScrnConfig::new(m, 1, 1, 40);
            let rec = crn_run(
                &mut spec.build().unwrap(),
                &cfg,
                &[x0],
                &mut ChaCha8Rng::seed_from_u64(0),
            )
            .unwrap();
            for w in rec.rows.windows(2) {
                let (now, next) = (w[0].gap, w[1].gap);
                let bound = c * (now - next).max(0.0).powf(2.0 * alpha / 3.0) + 1e-9;
                assert!(
                    next <= bound,
                    "{spec:?} x0={x0} t={}: {next} > {bound}",
                    w[1].t
                );
            }
        }
    }
}

#[test]
fn sin_quadratic_constant_is_exposed() {
    let spec = SyntheticSpec::sin_quadratic(2.0);
    let tau = spec.build().unwrap().constants().tau.unwrap();
    assert!((tau - sin_quadratic_tau(2.0)).abs() <= 1e-12 * tau);
}

#[test]
fn cubic_newton_solves_a_quadratic_in_a_few_steps() {
    // with L₂ = 0 any M > 0 is admissible; a small one gives near-Newton steps
    let spec = SyntheticSpec::sin_quadratic(0.0);
    let cfg = ScrnConfig::new(0.01, 1, 1, 3);
    let rec = scrn_run(
        &mut spec.build().unwrap(),
        &cfg,
        &[1.0],
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    assert_eq!(rec.rows.len(), 4);
    assert!(rec.rows[3].gap <= 1e-6, "{}", rec.rows[3].gap);
}

#[test]
fn median_gap_decreases_on_the_noisy_power_function() {
    let spec = noisy_power();
    let cfg = ScrnConfig::new(penalty(&spec), 2000, 200, 16);
    let rows: Vec<Vec<f64>> = (0..20)
        .map(|seed| {
            let rec = scrn_run(
                &mut spec.build().unwrap(),
                &cfg,
                &[1.0],
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .unwrap();
            rec.rows.iter().map(|r| r.gap).collect()
        })
        .collect();
    // checkpoints stay above the noise floor of this batch size
    let med: Vec<f64> = [0, 1, 2, 4, 8, 16]
        .into_iter()
        .map(|t| median(rows.iter().map(|r| r[t]).collect()))
        .collect();
    for w in med.windows(2) {
        assert!(w[1] < w[0], "{med:?}");
    }
}

#[test]
fn variance_reduction_helps_at_a_matched_budget() {
    let spec = noisy_power();
    let m = penalty(&spec);
    let vr = vr_config(m, 60);
    let (mut vr_gaps, mut scrn_gaps) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let rec = vr_scrn_run(
            &mut spec.build().unwrap(),
            &vr,
            &[1.0],
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        let budget = rec.total_samples();
        vr_gaps.push(rec.final_gap());
        let mut cfg = ScrnConfig::new(m, 100, 100, usize::MAX);
        cfg.sample_budget = Some(budget);
        let rec = scrn_run(
            &mut spec.build().unwrap(),
            &cfg,
            &[1.0],
            &mut ChaCha8Rng::seed_from_u64(seed + 100),
        )
        .unwrap();
        assert_eq!(rec.status, RunStatus::BudgetExhausted);
        scrn_gaps.push(rec.final_gap());
    }
    let (a, b) = (median(vr_gaps), median(scrn_gaps));
    assert!(a <= b, "VR {a:e} vs SCRN {b:e}");
}
