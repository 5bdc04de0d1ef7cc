//! Experiment driver: builds a problem from a parsed description, runs the
//! requested algorithms, writes one CSV per algorithm plus a human-readable
//! summary, and optionally audits every trajectory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use super::audit::{audit_trajectory, AuditOptions, AuditReport};
use super::csv::write_csv;
use super::envelope::{check_rate_envelope, EnvelopeReport};
use super::expspec::{AlgorithmId, ExperimentSpec, ProblemKind};
use crate::problems::{
    gen_onehot_logistic, gen_random_logsumexp, make_logistic, make_logsumexp, mushrooms_layout,
    DataError, SmoothOracle, ZeroProx, MUSHROOMS_M,
};
use crate::solver::{
    cubic_newton, cubic_sr1_pqn, grad_reg_sr1_pqn, grad_sr1_pqn, gradient_descent, heavy_ball,
    SolverConfig, SolverError, Termination, Trajectory,
};

/// Flop budget for the averaged-Hessian audit; above it the quadrature
/// checks are skipped and the summary says so.
const QUADRATURE_FLOP_BUDGET: f64 = 2e9;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("experiment lists no algorithms")]
    NoAlgorithms,
    #[error("problem construction failed: {0}")]
    Data(#[from] DataError),
    #[error("reference solve failed: {0}")]
    Reference(SolverError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How to run the experiment.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Audit trajectories and check rate envelopes. Requires a reference
    /// solve for the optimal value; disable for pure timing runs.
    pub audit: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { audit: true }
    }
}

/// Reference optimal value with the stationarity residual of the solve
/// that produced it.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceValue {
    pub value: f64,
    pub residual: f64,
}

/// One finished algorithm run.
#[derive(Debug)]
pub struct CompletedRun {
    pub id: AlgorithmId,
    pub csv_path: PathBuf,
    pub termination: Termination,
    pub iterations: usize,
    pub final_fval: f64,
    pub final_grad_norm: f64,
    pub wall_time_s: f64,
    pub envelope: Option<EnvelopeReport>,
    pub audit: Option<AuditReport>,
}

/// Outcome of one requested algorithm.
#[derive(Debug)]
pub enum RunOutcome {
    Completed(Box<CompletedRun>),
    Failed { id: AlgorithmId, error: String },
}

/// Everything produced by one experiment.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub summary_path: PathBuf,
    pub reference: Option<ReferenceValue>,
    pub runs: Vec<RunOutcome>,
}

impl ExperimentOutcome {
    /// True when every run completed and every enabled audit and envelope
    /// check passed. Hitting the iteration cap is not a failure.
    pub fn all_pass(&self) -> bool {
        self.runs.iter().all(|r| match r {
            RunOutcome::Failed { .. } => false,
            RunOutcome::Completed(run) => {
                run.audit.as_ref().map_or(true, |a| a.all_pass())
                    && run.envelope.as_ref().map_or(true, |e| e.all_pass())
            }
        })
    }
}

fn termination_label(t: Termination) -> &'static str {
    match t {
        Termination::StationarityReached => "stationarity reached",
        Termination::MaxIters => "iteration cap",
        Termination::SubproblemFailure => "subproblem failure",
    }
}

fn dispatch(
    id: AlgorithmId,
    f: &dyn SmoothOracle,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    match id {
        AlgorithmId::CubicSr1 => cubic_sr1_pqn(f, &ZeroProx, x0, cfg),
        AlgorithmId::GradSr1 => grad_sr1_pqn(f, &ZeroProx, x0, cfg),
        AlgorithmId::GradRegSr1 => grad_reg_sr1_pqn(f, &ZeroProx, x0, cfg),
        AlgorithmId::Gd => gradient_descent(f, x0, cfg),
        AlgorithmId::HeavyBall => heavy_ball(f, x0, cfg),
        AlgorithmId::CubicNewton => cubic_newton(f, x0, cfg),
    }
}

fn build_problem(spec: &ExperimentSpec) -> Result<Box<dyn SmoothOracle>, DataError> {
    match spec.problem {
        ProblemKind::LogSumExp => {
            let data = gen_random_logsumexp(spec.m, spec.n, spec.seed);
            Ok(Box::new(make_logsumexp(data, spec.mu)?))
        }
        ProblemKind::Mushrooms => {
            let data = gen_onehot_logistic(MUSHROOMS_M, mushrooms_layout(), spec.seed)?;
            Ok(Box::new(make_logistic(data, spec.mu)?))
        }
    }
}

fn data_rows(spec: &ExperimentSpec) -> usize {
    match spec.problem {
        ProblemKind::LogSumExp => spec.m,
        ProblemKind::Mushrooms => MUSHROOMS_M,
    }
}

/// Start point: the origin, or a seed-deterministic point of the ball of
/// radius `x0_radius` when that is positive.
fn initial_point(n: usize, spec: &ExperimentSpec) -> DVector<f64> {
    if spec.x0_radius == 0.0 {
        return DVector::zeros(n);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let dir = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let t: f64 = rng.gen();
    let scale = spec.x0_radius * t.powf(1.0 / n as f64) / dir.norm().max(1e-300);
    dir * scale
}

/// Runs every algorithm in the spec on the described problem. Writes
/// `<name>.csv` per algorithm and `summary.txt` into `out_dir`. One
/// algorithm failing is recorded and does not stop the others; an empty
/// algorithm list is an error and creates no files.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<ExperimentOutcome, RunnerError> {
    if spec.algorithms.is_empty() {
        return Err(RunnerError::NoAlgorithms);
    }
    let f = build_problem(spec)?;
    let f = f.as_ref();
    let n = f.dim();
    let x0 = initial_point(n, spec);
    let kappa_bar = spec.kappa_bar_factor * f.lip_grad();

    fs::create_dir_all(out_dir)?;

    let mut trajs: Vec<(AlgorithmId, Result<Trajectory, SolverError>)> = Vec::new();
    for &id in &spec.algorithms {
        let cfg = SolverConfig {
            max_iters: spec.max_iters,
            stationarity_tol: spec.tol,
            kappa_bar,
            record_matrices: opts.audit && id.metric_method().is_some(),
            ..SolverConfig::default()
        };
        trajs.push((id, dispatch(id, f, &x0, &cfg)));
    }

    let reference = if opts.audit {
        Some(reference_value(f, &x0, &trajs)?)
    } else {
        None
    };

    let mut runs = Vec::new();
    for (id, res) in &trajs {
        match res {
            Err(e) => runs.push(RunOutcome::Failed {
                id: *id,
                error: e.to_string(),
            }),
            Ok(traj) => {
                let csv_path = out_dir.join(format!("{}.csv", id.name()));
                write_csv(&csv_path, &traj.records)?;

                let mut envelope = None;
                let mut audit = None;
                if let (Some(which), Some(r)) = (id.metric_method(), reference) {
                    envelope = Some(check_rate_envelope(
                        traj, f, which, kappa_bar, r.value, r.residual,
                    ));
                    let hessian_flops =
                        64.0 * data_rows(spec) as f64 * (n * n) as f64 * traj.records.len() as f64;
                    let audit_opts = AuditOptions {
                        with_quadrature: hessian_flops <= QUADRATURE_FLOP_BUDGET,
                        f_star: Some(r.value),
                        ..AuditOptions::default()
                    };
                    let cfg = SolverConfig {
                        max_iters: spec.max_iters,
                        stationarity_tol: spec.tol,
                        kappa_bar,
                        record_matrices: true,
                        ..SolverConfig::default()
                    };
                    audit = Some(audit_trajectory(traj, f, which, false, &cfg, &audit_opts));
                }

                let last = traj.final_record();
                runs.push(RunOutcome::Completed(Box::new(CompletedRun {
                    id: *id,
                    csv_path,
                    termination: traj.termination,
                    iterations: traj.iterations(),
                    final_fval: last.fval,
                    final_grad_norm: last.grad_norm,
                    wall_time_s: last.time_s,
                    envelope,
                    audit,
                })));
            }
        }
    }

    let outcome = ExperimentOutcome {
        out_dir: out_dir.to_path_buf(),
        summary_path: out_dir.join("summary.txt"),
        reference,
        runs,
    };
    fs::write(&outcome.summary_path, render_summary(spec, f, kappa_bar, &outcome))?;
    Ok(outcome)
}

/// High-accuracy optimal value: a cubic Newton solve warm-started at the
/// best point any run reached. Deterministic for a fixed spec and seed.
fn reference_value(
    f: &dyn SmoothOracle,
    x0: &DVector<f64>,
    trajs: &[(AlgorithmId, Result<Trajectory, SolverError>)],
) -> Result<ReferenceValue, RunnerError> {
    let mut start = x0.clone();
    let mut best = f64::INFINITY;
    for (_, res) in trajs {
        if let Ok(traj) = res {
            let fval = traj.final_record().fval;
            if fval < best {
                best = fval;
                start = traj.final_x.clone();
            }
        }
    }
    let cfg = SolverConfig {
        max_iters: 500,
        stationarity_tol: 1e-13,
        ..SolverConfig::default()
    };
    let traj = cubic_newton(f, &start, &cfg).map_err(RunnerError::Reference)?;
    let last = traj.final_record();
    Ok(ReferenceValue {
        value: last.fval,
        residual: last.grad_norm,
    })
}

fn render_summary(
    spec: &ExperimentSpec,
    f: &dyn SmoothOracle,
    kappa_bar: f64,
    outcome: &ExperimentOutcome,
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "problem: {} (m={}, n={}, seed={}, mu={})",
        spec.problem.name(),
        data_rows(spec),
        f.dim(),
        spec.seed,
        spec.mu
    );
    let _ = writeln!(
        s,
        "constants: L={:.6e} L_H={:.6e} kappa_bar={:.6e} (factor {})",
        f.lip_grad(),
        f.lip_hess(),
        kappa_bar,
        spec.kappa_bar_factor
    );
    let _ = writeln!(s, "budget: max_iters={} tol={:e}", spec.max_iters, spec.tol);
    match outcome.reference {
        Some(r) => {
            let _ = writeln!(
                s,
                "reference value: {:.15e} (stationarity residual {:.3e})",
                r.value, r.residual
            );
        }
        None => {
            let _ = writeln!(s, "reference value: not computed (bench mode)");
        }
    }
    let _ = writeln!(s);

    for run in &outcome.runs {
        match run {
            RunOutcome::Failed { id, error } => {
                let _ = writeln!(s, "{}: FAILED ({error})", id.name());
            }
            RunOutcome::Completed(run) => {
                let _ = writeln!(
                    s,
                    "{}: {} after {} iterations, stationarity {:.3e}, value {:.9e}, {:.3}s",
                    run.id.name(),
                    termination_label(run.termination),
                    run.iterations,
                    run.final_grad_norm,
                    run.final_fval,
                    run.wall_time_s
                );
                if let Some(env) = &run.envelope {
                    let _ = writeln!(
                        s,
                        "  envelope: {} (pre-superlinear through N={}, min margin {:.3e})",
                        if env.all_pass() { "pass" } else { "FAIL" },
                        env.pre_superlinear_through(),
                        env.min_margin()
                    );
                }
                if let Some(audit) = &run.audit {
                    if audit.all_pass() {
                        let _ = writeln!(
                            s,
                            "  audit: pass ({} checks, {} skipped)",
                            audit.checks.len(),
                            audit.skipped.len()
                        );
                    } else {
                        for c in audit.checks.iter().filter(|c| !c.pass) {
                            let _ = writeln!(
                                s,
                                "  audit FAIL: {} (first at iteration {:?}, excess {:.3e})",
                                c.name, c.first_violation, c.worst_excess
                            );
                        }
                    }
                    for msg in &audit.skipped {
                        let _ = writeln!(s, "  audit skipped: {msg}");
                    }
                }
            }
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "overall: {}",
        if outcome.all_pass() { "PASS" } else { "FAIL" }
    );
    s
}
