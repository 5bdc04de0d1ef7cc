//! Randomized self-checks of the metric kernel, the cubic subproblem
//! solver, and the problem oracles. Shared by the test suite and the
//! `check` command; every run is deterministic in the seed.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::audit::{Acc, CheckOutcome};
use super::oracles::{
    fd_gradient, fd_hessian, random_dominated_pair, random_spd_with_bounds, secular_cubic_step,
};
use crate::matrix::{nu_measure, order_margin, sr1_update, DEFAULT_SKIP_TOL};
use crate::problems::{
    gen_onehot_logistic, gen_random_logsumexp, make_logistic, make_logsumexp, SmoothOracle,
};
use crate::subproblem::{cubic_step_smooth, CubicModel};

/// Random dominated pairs pushed through one SR1 update each. Verifies the
/// order sandwich `A <= SR1(A, G, u) <= G` and that the trace drop equals
/// the measured update quality, which in turn dominates the Rayleigh bound.
pub fn sr1_trial_suite(trials: usize, seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lower = Acc::new("sr1_preserves_lower_bound");
    let mut upper = Acc::new("sr1_stays_below_start");
    let mut drop_id = Acc::new("trace_drop_matches_measure");
    let mut rayleigh = Acc::new("measure_dominates_rayleigh");

    for t in 0..trials {
        let n = rng.gen_range(2..=20);
        let (j, g, u) = random_dominated_pair(n, 1.0, 10.0, &mut rng);
        let y = j.mul_vec(&u);
        let updated = sr1_update(&g, &u, &y, DEFAULT_SKIP_TOL).expect("dominated pair");
        let nu = nu_measure(&g, &u, &y).expect("dominated pair");

        lower.push(t, -order_margin(&j, &updated) - 1e-10);
        upper.push(t, -order_margin(&updated, &g) - 1e-10);

        let drop = g.trace() - updated.trace();
        drop_id.push(t, (drop - nu).abs() - 1e-10);

        let w = g.mul_vec(&u) - &y;
        let s = u.dot(&w);
        if s > DEFAULT_SKIP_TOL * u.norm() * w.norm() {
            let quad = u.dot(&g.mul_vec(&u));
            rayleigh.push(t, w.norm_squared() / quad - nu - 1e-10);
        }
    }
    vec![lower.done(), upper.done(), drop_id.done(), rayleigh.done()]
}

/// Random cubic models solved by the production bisection-on-radius path
/// and cross-checked against the eigenbasis secular solver, plus the
/// one-dimensional instance with a closed-form minimizer.
pub fn cubic_oracle_trials(trials: usize, seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step = Acc::new("cubic_step_matches_secular");
    let mut objective = Acc::new("cubic_objective_matches_secular");

    for t in 0..trials {
        let n = 5;
        let h = random_spd_with_bounds(n, 0.5, 8.0, &mut rng);
        let grad = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m_weight = rng.gen_range(0.1..=5.0);
        let model = CubicModel::new(grad.clone(), h.clone(), m_weight);
        let report = cubic_step_smooth(&model, 1e-12).expect("positive definite model");
        let (d_ref, _) = secular_cubic_step(&grad, &h, m_weight);

        step.push(t, (&report.d - &d_ref).norm() - 1e-8);
        objective.push(
            t,
            (model.objective(&report.d) - model.objective(&d_ref)).abs() - 1e-8,
        );
    }

    let mut closed = Acc::new("cubic_one_dim_closed_form");
    let model = CubicModel::new(
        DVector::from_vec(vec![-3.0]),
        crate::matrix::SymMatrix::identity(1),
        3.0,
    );
    let report = cubic_step_smooth(&model, 1e-14).expect("scalar model");
    let exact = (-1.0 + 37.0f64.sqrt()) / 6.0;
    closed.push(0, (report.d[0] - exact).abs() - 1e-12);

    vec![step.done(), objective.done(), closed.done()]
}

/// Analytic gradients and Hessians of both problem families against
/// central finite differences at random points.
pub fn finite_difference_trials(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grad_check = Acc::new("gradients_match_finite_differences");
    let mut hess_check = Acc::new("hessians_match_finite_differences");

    let lse = make_logsumexp(gen_random_logsumexp(20, 6, seed), 1.0).unwrap();
    let logit = make_logistic(
        gen_onehot_logistic(60, &[3, 4, 2, 5], seed).unwrap(),
        0.1,
    )
    .unwrap();
    let oracles: [&dyn SmoothOracle; 2] = [&lse, &logit];

    let mut trial = 0;
    for f in oracles {
        for _ in 0..3 {
            let x = DVector::from_fn(f.dim(), |_, _| {
                0.5 * rng.sample::<f64, _>(StandardNormal)
            });
            let g = f.gradient(&x);
            let g_fd = fd_gradient(f, &x, 1e-5);
            grad_check.push(trial, (&g - &g_fd).amax() - 1e-6 * (1.0 + g.amax()));

            let h = f.hessian(&x);
            let h_fd = fd_hessian(f, &x, 1e-4);
            let err = (h.as_matrix() - h_fd.as_matrix()).amax();
            hess_check.push(trial, err - 1e-5 * (1.0 + h.as_matrix().amax()));
            trial += 1;
        }
    }
    vec![grad_check.done(), hess_check.done()]
}

/// The full deterministic self-check battery.
pub fn standard_check_suite(seed: u64) -> Vec<CheckOutcome> {
    let mut out = sr1_trial_suite(1000, seed);
    out.extend(cubic_oracle_trials(200, seed.wrapping_add(1)));
    out.extend(finite_difference_trials(seed.wrapping_add(2)));
    out
}
