//! Acceptance gate. Each test is one numbered criterion, pinned to its
//! stated tolerance; cargo's per-test line is the pass/fail record.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DVector;
use sr1pqn::harness::audit::{audit_trajectory, AuditOptions, AuditReport, CheckOutcome};
use sr1pqn::harness::checks::{cubic_oracle_trials, sr1_trial_suite};
use sr1pqn::harness::csv::strip_time_column;
use sr1pqn::harness::envelope::check_rate_envelope;
use sr1pqn::harness::expspec::parse_spec;
use sr1pqn::harness::runner::{run_experiment, RunOptions};
use sr1pqn::harness::MetricMethod;
use sr1pqn::problems::{
    gen_onehot_logistic, gen_random_logsumexp, make_l1_prox, make_logistic, make_logsumexp,
    mushrooms_layout, Logistic, LogSumExp, ZeroProx, MUSHROOMS_M,
};
use sr1pqn::solver::{
    cubic_newton, cubic_sr1_pqn, grad_reg_sr1_pqn, grad_sr1_pqn, gradient_descent, heavy_ball,
};
use sr1pqn::{SmoothOracle, SolverConfig, Termination, Trajectory};

const DESK_TOL: f64 = 1e-9;
const DESK_CAP: usize = 50;

fn desk_oracle() -> &'static LogSumExp {
    static CELL: OnceLock<LogSumExp> = OnceLock::new();
    CELL.get_or_init(|| make_logsumexp(gen_random_logsumexp(100, 50, 1), 1.0).unwrap())
}

fn desk_config() -> SolverConfig {
    let f = desk_oracle();
    SolverConfig {
        max_iters: DESK_CAP,
        stationarity_tol: DESK_TOL,
        kappa_bar: 3.0 * f.lip_grad(),
        record_matrices: true,
        ..SolverConfig::default()
    }
}

fn desk_runs() -> &'static Vec<(MetricMethod, &'static str, Trajectory)> {
    static CELL: OnceLock<Vec<(MetricMethod, &'static str, Trajectory)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let f = desk_oracle();
        let x0 = DVector::zeros(f.dim());
        let cfg = desk_config();
        vec![
            (MetricMethod::Cubic, "cubic", cubic_sr1_pqn(f, &ZeroProx, &x0, &cfg).unwrap()),
            (MetricMethod::Grad, "grad", grad_sr1_pqn(f, &ZeroProx, &x0, &cfg).unwrap()),
            (
                MetricMethod::GradReg,
                "grad_reg",
                grad_reg_sr1_pqn(f, &ZeroProx, &x0, &cfg).unwrap(),
            ),
        ]
    })
}

/// High-accuracy reference optimum for the desk problem: (value, residual).
fn desk_reference() -> (f64, f64) {
    static CELL: OnceLock<(f64, f64)> = OnceLock::new();
    *CELL.get_or_init(|| {
        let f = desk_oracle();
        let cfg = SolverConfig {
            max_iters: 500,
            stationarity_tol: 1e-13,
            ..SolverConfig::default()
        };
        let traj = cubic_newton(f, &DVector::zeros(f.dim()), &cfg).unwrap();
        let last = traj.final_record();
        (last.fval, last.grad_norm)
    })
}

fn desk_audits() -> &'static Vec<(&'static str, AuditReport)> {
    static CELL: OnceLock<Vec<(&'static str, AuditReport)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let f = desk_oracle();
        let cfg = desk_config();
        let opts = AuditOptions {
            with_quadrature: true,
            f_star: Some(desk_reference().0),
            ..AuditOptions::default()
        };
        desk_runs()
            .iter()
            .map(|(which, name, traj)| (*name, audit_trajectory(traj, f, *which, false, &cfg, &opts)))
            .collect()
    })
}

fn mushrooms_oracle() -> &'static Logistic {
    static CELL: OnceLock<Logistic> = OnceLock::new();
    CELL.get_or_init(|| {
        let data = gen_onehot_logistic(MUSHROOMS_M, mushrooms_layout(), 1).unwrap();
        make_logistic(data, 0.1).unwrap()
    })
}

/// Mushrooms runs of the three metric methods at the benchmark tolerance.
fn mushrooms_runs() -> &'static Vec<(&'static str, Trajectory)> {
    static CELL: OnceLock<Vec<(&'static str, Trajectory)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let f = mushrooms_oracle();
        let x0 = DVector::zeros(f.dim());
        let cfg = SolverConfig {
            max_iters: 20000,
            stationarity_tol: 1e-8,
            kappa_bar: 4.0 * f.lip_grad(),
            ..SolverConfig::default()
        };
        vec![
            ("cubic", cubic_sr1_pqn(f, &ZeroProx, &x0, &cfg).unwrap()),
            ("grad", grad_sr1_pqn(f, &ZeroProx, &x0, &cfg).unwrap()),
            ("grad_reg", grad_reg_sr1_pqn(f, &ZeroProx, &x0, &cfg).unwrap()),
        ]
    })
}

fn sr1_suite() -> &'static (Vec<CheckOutcome>, f64) {
    static CELL: OnceLock<(Vec<CheckOutcome>, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let checks = sr1_trial_suite(1000, 2026);
        (checks, start.elapsed().as_secs_f64())
    })
}

fn find<'a>(checks: &'a [CheckOutcome], name: &str) -> &'a CheckOutcome {
    checks
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("missing check {name}"))
}

fn assert_descent(name: &str, traj: &Trajectory, mu: f64) {
    for pair in traj.records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let bound = -0.5 * mu * a.r_k * a.r_k + 1e-8 * (1.0 + a.fval.abs());
        assert!(
            b.fval - a.fval <= bound,
            "{name}: descent violated at iteration {}: drop {} vs bound {bound}",
            a.iter,
            b.fval - a.fval,
        );
    }
}

#[test]
fn criterion_01_sr1_order_preservation() {
    let (checks, elapsed) = sr1_suite();
    let lower = find(checks, "sr1_preserves_lower_bound");
    let upper = find(checks, "sr1_stays_below_start");
    assert!(lower.pass, "lower order bound violated: {lower:?}");
    assert!(upper.pass, "upper order bound violated: {upper:?}");
    assert!(*elapsed < 5.0, "1000 trials took {elapsed:.2}s, budget 5s");
    println!(
        "criterion 1: PASS — order preserved over {} trials in {elapsed:.2}s",
        lower.checked
    );
}

#[test]
fn criterion_02_potential_identity_and_measure_bound() {
    let (checks, _) = sr1_suite();
    let drop = find(checks, "trace_drop_matches_measure");
    let rayleigh = find(checks, "measure_dominates_rayleigh");
    assert!(drop.pass, "trace drop mismatch: {drop:?}");
    assert!(rayleigh.pass, "measure below Rayleigh quotient: {rayleigh:?}");
    println!(
        "criterion 2: PASS — potential identity and measure bound over {} trials",
        drop.checked
    );
}

#[test]
fn criterion_03_cubic_subproblem_matches_oracle() {
    let checks = cubic_oracle_trials(200, 2027);
    for check in &checks {
        assert!(check.pass, "cubic subproblem check failed: {check:?}");
    }
    println!("criterion 3: PASS — 200 secular-oracle trials and the closed-form case");
}

#[test]
fn criterion_04_descent_inequality() {
    for (_, name, traj) in desk_runs() {
        assert_descent(&format!("desk/{name}"), traj, desk_oracle().mu());
    }
    for (name, traj) in mushrooms_runs() {
        assert_descent(&format!("mushrooms/{name}"), traj, mushrooms_oracle().mu());
    }
    println!("criterion 4: PASS — per-iteration descent on desk and mushrooms, all three methods");
}

#[test]
fn criterion_05_metric_chain() {
    for (name, report) in desk_audits() {
        for check in [
            "averaged_hessian_above_mu",
            "averaged_hessian_below_lip",
            "sr1_dominates_averaged_hessian",
            "sr1_below_metric",
        ] {
            let outcome = report.find(check).unwrap_or_else(|| panic!("{name}: no {check}"));
            assert!(outcome.pass, "{name}: {check} failed: {outcome:?}");
        }
    }
    println!("criterion 5: PASS — metric order chain within 1e-6 on all desk trajectories");
}

#[test]
fn criterion_06_trace_cap_and_restart_boundary() {
    let f = mushrooms_oracle();
    let cap = f.dim() as f64 * 4.0 * f.lip_grad() + 1e-10;
    for (name, traj) in mushrooms_runs() {
        if *name == "cubic" {
            continue;
        }
        for row in traj.records.iter().filter(|r| r.iter >= 1) {
            assert!(
                row.trace_g <= cap,
                "{name}: trace {} above cap {cap} at iteration {}",
                row.trace_g,
                row.iter
            );
        }
    }

    let small = make_logsumexp(gen_random_logsumexp(30, 8, 11), 1.0).unwrap();
    let cfg = SolverConfig {
        max_iters: 40,
        stationarity_tol: 0.0,
        kappa_bar: small.lip_grad(),
        record_matrices: true,
        ..SolverConfig::default()
    };
    let traj = grad_sr1_pqn(&small, &ZeroProx, &DVector::zeros(8), &cfg).unwrap();
    let restarts = traj.records.iter().filter(|r| r.restart).count();
    assert!(restarts > 0, "tight trace budget produced no restart");
    let small_cap = 8.0 * small.lip_grad() + 1e-10;
    for row in traj.records.iter().filter(|r| r.iter >= 1) {
        assert!(row.trace_g <= small_cap, "restart run trace {} above {small_cap}", row.trace_g);
    }
    println!("criterion 6: PASS — trace cap on mushrooms and across {restarts} forced restarts");
}

#[test]
fn criterion_07_curvature_and_potential_descent() {
    for (name, report) in desk_audits() {
        for check in ["curvature_bound", "potential_descent"] {
            let outcome = report.find(check).unwrap_or_else(|| panic!("{name}: no {check}"));
            assert!(outcome.pass, "{name}: {check} failed: {outcome:?}");
        }
    }
    println!("criterion 7: PASS — curvature and potential-descent inequalities on desk runs");
}

#[test]
fn criterion_08_rate_envelopes() {
    let f = desk_oracle();
    let (f_star, residual) = desk_reference();
    assert!(residual <= 1e-13, "reference residual {residual} above 1e-13");
    for (which, name, traj) in desk_runs() {
        let report = check_rate_envelope(traj, f, *which, 3.0 * f.lip_grad(), f_star, residual);
        assert!(
            report.all_pass(),
            "{name}: envelope violated (min margin {})",
            report.min_margin()
        );
    }
    println!("criterion 8: PASS — rate envelopes hold at every N on all desk runs");
}

#[test]
fn criterion_09_first_order_ordering() {
    let f = mushrooms_oracle();
    let x0 = DVector::zeros(f.dim());
    let start = Instant::now();

    let quasi_cfg = SolverConfig {
        max_iters: 20000,
        stationarity_tol: 1e-8,
        kappa_bar: 4.0 * f.lip_grad(),
        ..SolverConfig::default()
    };
    let quasi = grad_sr1_pqn(f, &ZeroProx, &x0, &quasi_cfg).unwrap();
    assert_eq!(quasi.termination, Termination::StationarityReached);

    // The baselines only need the loose 1e-4 target; a cap far above the
    // quasi-Newton count still decides the strict ordering.
    let loose = |max_iters: usize| SolverConfig {
        max_iters,
        stationarity_tol: 1e-4,
        ..SolverConfig::default()
    };
    let gd = gradient_descent(f, &x0, &loose(1200)).unwrap();
    let hb = heavy_ball(f, &x0, &loose(2500)).unwrap();

    assert!(
        quasi.iterations() < gd.iterations(),
        "quasi-Newton {} not below gradient descent {}",
        quasi.iterations(),
        gd.iterations()
    );
    assert!(
        quasi.iterations() < hb.iterations(),
        "quasi-Newton {} not below heavy ball {}",
        quasi.iterations(),
        hb.iterations()
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "comparison took {elapsed:.1}s, budget 60s");
    println!(
        "criterion 9: PASS — {} quasi-Newton iterations vs {} (gd, capped) and {} (heavy ball) in {elapsed:.1}s",
        quasi.iterations(),
        gd.iterations(),
        hb.iterations()
    );
}

#[test]
fn criterion_10_composite_smoke() {
    let f = make_logsumexp(gen_random_logsumexp(60, 20, 3), 1.0).unwrap();
    let prox = make_l1_prox(0.1);
    let x0 = DVector::zeros(20);
    let cfg = SolverConfig {
        max_iters: 400,
        stationarity_tol: 1e-7,
        kappa_bar: 3.0 * f.lip_grad(),
        record_matrices: true,
        ..SolverConfig::default()
    };
    let runs = [
        ("cubic", cubic_sr1_pqn(&f, &prox, &x0, &cfg).unwrap()),
        ("grad", grad_sr1_pqn(&f, &prox, &x0, &cfg).unwrap()),
    ];
    for (name, traj) in &runs {
        for pair in traj.records.windows(2) {
            assert!(
                pair[1].fval <= pair[0].fval + 1e-12 * (1.0 + pair[0].fval.abs()),
                "{name}: objective rose at iteration {}",
                pair[0].iter
            );
        }
        for (k, snap) in traj.snapshots.iter().enumerate() {
            assert!(
                snap.inclusion_residual <= 1e-6,
                "{name}: inclusion residual {} at iteration {k}",
                snap.inclusion_residual
            );
        }
        let last = traj.final_record();
        assert!(
            last.grad_norm <= 1e-6,
            "{name}: final stationarity {} above 1e-6",
            last.grad_norm
        );
    }
    println!("criterion 10: PASS — composite runs descend with certified inclusions");
}

#[test]
fn criterion_11_inverse_maintenance() {
    let f = mushrooms_oracle();
    let cfg = SolverConfig {
        max_iters: 220,
        stationarity_tol: 0.0,
        kappa_bar: 4.0 * f.lip_grad(),
        record_matrices: true,
        ..SolverConfig::default()
    };
    let traj = grad_sr1_pqn(f, &ZeroProx, &DVector::zeros(f.dim()), &cfg).unwrap();
    assert!(traj.snapshots.len() >= 200, "only {} iterations recorded", traj.snapshots.len());
    let mut worst = 0.0f64;
    for (k, snap) in traj.snapshots.iter().enumerate() {
        let res = snap.inv_residual.unwrap_or_else(|| panic!("no inverse at iteration {k}"));
        assert!(res <= 1e-8, "inverse residual {res} at iteration {k}");
        worst = worst.max(res);
    }
    let restarts = traj.records.iter().filter(|r| r.restart).count();
    assert!(restarts > 0, "no restart inside the maintenance window");
    println!(
        "criterion 11: PASS — worst inverse residual {worst:.3e} over {} iterations, {restarts} restarts",
        traj.snapshots.len()
    );
}

#[test]
fn criterion_12_deterministic_csv_output() {
    let spec = parse_spec(
        "problem = logsumexp\n\
         m = 30\n\
         n = 8\n\
         seed = 11\n\
         mu = 1.0\n\
         kappa_bar_factor = 3.0\n\
         algorithms = cubic_sr1, grad_sr1, grad_reg_sr1, cubic_newton, gd, heavy_ball\n\
         max_iters = 5000\n\
         tol = 1e-9\n\
         x0_radius = 0.0\n",
    )
    .unwrap();
    let opts = RunOptions { audit: false };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let out_a = run_experiment(&spec, dir_a.path(), &opts).unwrap();
    let out_b = run_experiment(&spec, dir_b.path(), &opts).unwrap();
    assert!(out_a.all_pass() && out_b.all_pass());
    for name in ["cubic_sr1", "grad_sr1", "grad_reg_sr1", "cubic_newton", "gd", "heavy_ball"] {
        let a = std::fs::read_to_string(dir_a.path().join(format!("{name}.csv"))).unwrap();
        let b = std::fs::read_to_string(dir_b.path().join(format!("{name}.csv"))).unwrap();
        assert_eq!(strip_time_column(&a), strip_time_column(&b), "{name} differs between runs");
    }
    println!("criterion 12: PASS — repeated runs agree byte-for-byte outside timing");
}
