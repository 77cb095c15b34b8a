use std::time::Instant;

use rand::Rng;

use super::{check_start, IterRow, OptRunRecord, Result, RunStatus, ScrnConfig};
use crate::linalg::{self, dot, SymMatrix};
use crate::oracle::StochasticOracle;

/// Shared cubic-Newton iteration. `estimate(oracle, t, x, rng)` supplies the
/// derivative estimates for iteration `t` at the current iterate.
pub(crate) fn newton_loop<O, R, E>(
    oracle: &mut O,
    config: &ScrnConfig,
    x0: &[f64],
    rng: &mut R,
    mut estimate: E,
) -> Result<OptRunRecord>
where
    O: StochasticOracle,
    R: Rng + ?Sized,
    E: FnMut(&mut O, usize, &[f64], &mut R) -> (Vec<f64>, SymMatrix),
{
    config.validate()?;
    check_start(oracle.dim(), x0)?;
    let clock = Instant::now();
    let base = oracle.counters();
    let mut x = x0.to_vec();
    let row = |o: &O, t: usize, x: &[f64], step: f64, rejected: bool, mv: f64, gd: f64| {
        let c = o.counters();
        IterRow {
            t,
            gap: o.gap(x),
            step_norm: step,
            grad_samples: c.gradient - base.gradient,
            hess_samples: c.hessian - base.hessian,
            rejected,
            model_value: mv,
            g_dot_delta: gd,
            elapsed_ms: clock.elapsed().as_secs_f64() * 1e3,
        }
    };
    let mut rows = vec![row(oracle, 0, &x, 0.0, false, 0.0, 0.0)];
    let threshold = config.stop_threshold();
    let mut status = RunStatus::MaxIters;

    for t in 0..config.max_iters {
        if let Some(budget) = config.sample_budget {
            if rows.last().map_or(0, |r| r.total_samples()) >= budget {
                status = RunStatus::BudgetExhausted;
                break;
            }
        }
        let (g, h) = estimate(oracle, t, &x, rng);
        if !linalg::all_finite(&g) || !h.is_finite() {
            status = RunStatus::NonFinite;
            break;
        }
        let gd_probe = g.clone();
        let sol = config.subsolver.solve(g, h, config.m_penalty, rng)?;
        let step = sol.step_norm();
        let rejected = config.delta_reject_threshold.is_some_and(|th| step > th);
        if !rejected {
            linalg::axpy(1.0, &sol.delta, &mut x);
        }
        if !linalg::all_finite(&x) {
            status = RunStatus::NonFinite;
            break;
        }
        rows.push(row(
            oracle,
            t + 1,
            &x,
            step,
            rejected,
            sol.model_value,
            dot(&gd_probe, &sol.delta),
        ));
        if config.stop_on_small_step && !rejected && step < threshold {
            status = RunStatus::SmallStep;
            break;
        }
    }
    Ok(OptRunRecord {
        rows,
        status,
        x_final: x,
    })
}

/// Stochastic cubic regularized Newton: each iteration averages `n1`
/// gradient and `n2` Hessian samples at the current point and moves to the
/// minimizer of the cubic model.
pub fn scrn_run<O, R>(
    oracle: &mut O,
    config: &ScrnConfig,
    x0: &[f64],
    rng: &mut R,
) -> Result<OptRunRecord>
where
    O: StochasticOracle,
    R: Rng + ?Sized,
{
    let (n1, n2) = (config.n1, config.n2);
    newton_loop(oracle, config, x0, rng, |o, _, x, rng| {
        let g = o.sample_gradient(x, n1, rng);
        let h = o.sample_hessian(x, n2, rng);
        (g, h)
    })
}

/// Cubic regularized Newton with exact derivatives; no samples are drawn.
pub fn crn_run<O, R>(
    oracle: &mut O,
    config: &ScrnConfig,
    x0: &[f64],
    rng: &mut R,
) -> Result<OptRunRecord>
where
    O: StochasticOracle,
    R: Rng + ?Sized,
{
    newton_loop(oracle, config, x0, rng, |o, _, x, _| {
        (o.gradient(x), o.hessian(x))
    })
}
