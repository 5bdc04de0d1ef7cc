//! Outer iteration drivers: the three regularized SR1 proximal quasi-Newton
//! methods plus first- and second-order baselines, all reporting uniform
//! per-iteration records.
//!
//! Record semantics, shared by every driver: row `k` describes the iterate
//! `x_k`. `fval` and `grad_norm` are the objective and stationarity measure
//! at `x_k`, `r_k` is the norm of the step taken from `x_k` (zero on the
//! terminal row), `lambda_k` is the correction factor in force at `x_k`,
//! `trace_g` the trace of the corrected metric used there, `restart` marks a
//! metric that was just reset, and `time_s` is the wall-clock time when the
//! iteration started. Runs always end with a terminal row, so a trajectory
//! with `N` iterations carries `N + 1` records.

mod sr1;

pub use sr1::{cubic_sr1_pqn, grad_reg_sr1_pqn, grad_sr1_pqn};

use crate::matrix::{MatrixError, SymMatrix};
use crate::problems::{ProxTerm, SmoothOracle};
use crate::subproblem::{cubic_step_smooth, CubicModel, InnerConfig, SubproblemError};
use nalgebra::DVector;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("start point has dimension {x0}, oracle expects {oracle}")]
    Dimension { oracle: usize, x0: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Subproblem(#[from] SubproblemError),
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    StationarityReached,
    MaxIters,
    SubproblemFailure,
}

/// One row of a run, in the layout the CSV writer emits.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    pub fval: f64,
    pub grad_norm: f64,
    pub r_k: f64,
    pub lambda_k: f64,
    pub trace_g: f64,
    pub restart: bool,
    pub time_s: f64,
}

/// Per-iteration material for invariant audits, kept only when
/// [`SolverConfig::record_matrices`] is set. `g_tilde` is the corrected
/// metric the step was computed in, `g_next` the SR1 update it produced
/// (before any restart decision replaced it), and `fprime_next` the
/// stationarity certificate at the new iterate.
#[derive(Debug, Clone)]
pub struct MetricSnapshot {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    pub g_tilde: SymMatrix,
    pub g_next: SymMatrix,
    pub fprime_next: DVector<f64>,
    pub inclusion_residual: f64,
    pub inv_residual: Option<f64>,
}

/// Complete run history.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
    pub snapshots: Vec<MetricSnapshot>,
    pub final_x: DVector<f64>,
    pub termination: Termination,
}

impl Trajectory {
    /// Number of steps taken; one less than the number of records.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("a trajectory always has a terminal record")
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when the stationarity measure falls to this fraction of
    /// `max(1, initial measure)`. Zero disables early stopping.
    pub stationarity_tol: f64,
    /// Trace budget factor; the corrected metric's trace is kept at or below
    /// `n * kappa_bar` by restarts. Only the gradient-regularized methods
    /// read it.
    pub kappa_bar: f64,
    /// Absolute threshold on the stationarity certificate below which the
    /// metric update is skipped, freezing the metric in the noise regime.
    pub skip_tol: f64,
    pub inner: InnerConfig,
    /// Keep per-iteration matrices and vectors for audits.
    pub record_matrices: bool,
}

impl SolverConfig {
    /// Certificate level below which the SR1 update is skipped and the
    /// metric carried unchanged. A certificate inside the stopping
    /// threshold means the run terminates next iteration, so the update
    /// would only fold terminal rounding error into the metric.
    /// `g_ref` is `max(1, initial stationarity measure)`.
    pub fn update_floor(&self, g_ref: f64) -> f64 {
        (self.stationarity_tol * g_ref).max(self.skip_tol)
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 1000,
            stationarity_tol: 1e-10,
            kappa_bar: f64::INFINITY,
            skip_tol: 1e-12,
            inner: InnerConfig::default(),
            record_matrices: false,
        }
    }
}

pub(crate) fn check_common(
    f: &dyn SmoothOracle,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(), SolverError> {
    if x0.len() != f.dim() {
        return Err(SolverError::Dimension {
            oracle: f.dim(),
            x0: x0.len(),
        });
    }
    if cfg.max_iters == 0 {
        return Err(SolverError::Config("max_iters must be positive".into()));
    }
    if !(cfg.stationarity_tol >= 0.0) {
        return Err(SolverError::Config(
            "stationarity_tol must be nonnegative".into(),
        ));
    }
    if !(cfg.skip_tol >= 0.0) {
        return Err(SolverError::Config("skip_tol must be nonnegative".into()));
    }
    if !(cfg.inner.tol > 0.0) || cfg.inner.max_iters == 0 {
        return Err(SolverError::Config(
            "inner tolerance must be positive and inner budget nonzero".into(),
        ));
    }
    if !(f.mu() > 0.0) || f.lip_grad() < f.mu() {
        return Err(SolverError::Config(
            "oracle constants require 0 < mu <= L".into(),
        ));
    }
    Ok(())
}

/// Stationarity measure at a point: the gradient norm for smooth problems,
/// the norm of the proximal-gradient mapping at step `1/L` otherwise.
pub fn stationarity_measure(
    f: &dyn SmoothOracle,
    g: &dyn ProxTerm,
    x: &DVector<f64>,
    grad: &DVector<f64>,
) -> f64 {
    if g.is_zero() {
        grad.norm()
    } else {
        let t = 1.0 / f.lip_grad();
        let z = g.prox(&(x - grad * t), t);
        ((x - z) / t).norm()
    }
}

/// Restart predicate on the candidate trace: strictly above the budget
/// restarts; a trace exactly at `n * kappa_bar` is kept.
pub fn restart_needed(trace_hat: f64, n: usize, kappa_bar: f64) -> bool {
    trace_hat > n as f64 * kappa_bar
}

/// Momentum and step size of the heavy-ball baseline for constants `(L, mu)`.
pub fn heavy_ball_coefficients(l: f64, mu: f64) -> (f64, f64) {
    let (sl, sm) = (l.sqrt(), mu.sqrt());
    ((sl - sm) / (sl + sm), 4.0 / (sl + sm).powi(2))
}

struct BaselineRun {
    records: Vec<IterationRecord>,
    termination: Termination,
    terminal_pushed: bool,
    start: Instant,
    g_ref: f64,
}

impl BaselineRun {
    fn new(g0: f64) -> Self {
        BaselineRun {
            records: Vec::new(),
            termination: Termination::MaxIters,
            terminal_pushed: false,
            start: Instant::now(),
            g_ref: g0.max(1.0),
        }
    }

    fn reached(&self, gk: f64, tol: f64) -> bool {
        gk <= tol * self.g_ref
    }

    fn finish(mut self, x: DVector<f64>, row: IterationRecord, tol: f64) -> Trajectory {
        if !self.terminal_pushed {
            if self.reached(row.grad_norm, tol) {
                self.termination = Termination::StationarityReached;
            }
            self.records.push(row);
        }
        Trajectory {
            records: self.records,
            snapshots: Vec::new(),
            final_x: x,
            termination: self.termination,
        }
    }
}

/// Fixed-step gradient descent with step `1/L`.
pub fn gradient_descent(
    f: &dyn SmoothOracle,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    check_common(f, x0, cfg)?;
    let l = f.lip_grad();
    let mut x = x0.clone();
    let mut grad = f.gradient(&x);
    let mut run = BaselineRun::new(grad.norm());

    for k in 0..cfg.max_iters {
        let t_k = run.start.elapsed().as_secs_f64();
        let gk = grad.norm();
        let fval = f.value(&x);
        if run.reached(gk, cfg.stationarity_tol) {
            run.records.push(IterationRecord {
                iter: k,
                fval,
                grad_norm: gk,
                r_k: 0.0,
                lambda_k: 0.0,
                trace_g: 0.0,
                restart: false,
                time_s: t_k,
            });
            run.termination = Termination::StationarityReached;
            run.terminal_pushed = true;
            break;
        }
        let step = &grad / l;
        run.records.push(IterationRecord {
            iter: k,
            fval,
            grad_norm: gk,
            r_k: step.norm(),
            lambda_k: 0.0,
            trace_g: 0.0,
            restart: false,
            time_s: t_k,
        });
        x -= step;
        grad = f.gradient(&x);
    }
    let row = IterationRecord {
        iter: run.records.len(),
        fval: f.value(&x),
        grad_norm: grad.norm(),
        r_k: 0.0,
        lambda_k: 0.0,
        trace_g: 0.0,
        restart: false,
        time_s: run.start.elapsed().as_secs_f64(),
    };
    Ok(run.finish(x, row, cfg.stationarity_tol))
}

/// Heavy-ball method with the classical strongly convex coefficients.
pub fn heavy_ball(
    f: &dyn SmoothOracle,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    check_common(f, x0, cfg)?;
    let (beta, tau) = heavy_ball_coefficients(f.lip_grad(), f.mu());
    let mut x = x0.clone();
    let mut x_prev = x0.clone();
    let mut grad = f.gradient(&x);
    let mut run = BaselineRun::new(grad.norm());

    for k in 0..cfg.max_iters {
        let t_k = run.start.elapsed().as_secs_f64();
        let gk = grad.norm();
        let fval = f.value(&x);
        if run.reached(gk, cfg.stationarity_tol) {
            run.records.push(IterationRecord {
                iter: k,
                fval,
                grad_norm: gk,
                r_k: 0.0,
                lambda_k: 0.0,
                trace_g: 0.0,
                restart: false,
                time_s: t_k,
            });
            run.termination = Termination::StationarityReached;
            run.terminal_pushed = true;
            break;
        }
        let x_next = &x - &grad * tau + (&x - &x_prev) * beta;
        run.records.push(IterationRecord {
            iter: k,
            fval,
            grad_norm: gk,
            r_k: (&x_next - &x).norm(),
            lambda_k: 0.0,
            trace_g: 0.0,
            restart: false,
            time_s: t_k,
        });
        x_prev = x;
        x = x_next;
        grad = f.gradient(&x);
    }
    let row = IterationRecord {
        iter: run.records.len(),
        fval: f.value(&x),
        grad_norm: grad.norm(),
        r_k: 0.0,
        lambda_k: 0.0,
        trace_g: 0.0,
        restart: false,
        time_s: run.start.elapsed().as_secs_f64(),
    };
    Ok(run.finish(x, row, cfg.stationarity_tol))
}

/// Cubic-regularized Newton method on the exact Hessian, the second-order
/// baseline. Also the reference-solution engine: with a zero Hessian
/// Lipschitz constant it reduces to plain Newton steps.
pub fn cubic_newton(
    f: &dyn SmoothOracle,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    check_common(f, x0, cfg)?;
    let lh = f.lip_hess();
    let mut x = x0.clone();
    let mut grad = f.gradient(&x);
    let mut run = BaselineRun::new(grad.norm());

    for k in 0..cfg.max_iters {
        let t_k = run.start.elapsed().as_secs_f64();
        let gk = grad.norm();
        let fval = f.value(&x);
        if run.reached(gk, cfg.stationarity_tol) {
            run.records.push(IterationRecord {
                iter: k,
                fval,
                grad_norm: gk,
                r_k: 0.0,
                lambda_k: 0.0,
                trace_g: 0.0,
                restart: false,
                time_s: t_k,
            });
            run.termination = Termination::StationarityReached;
            run.terminal_pushed = true;
            break;
        }
        let hess = f.hessian(&x);
        let trace_h = hess.trace();
        let model = CubicModel::new(grad.clone(), hess, lh);
        let rep = cubic_step_smooth(&model, cfg.inner.tol)?;
        if !rep.converged {
            run.records.push(IterationRecord {
                iter: k,
                fval,
                grad_norm: gk,
                r_k: 0.0,
                lambda_k: 0.0,
                trace_g: trace_h,
                restart: false,
                time_s: t_k,
            });
            run.termination = Termination::SubproblemFailure;
            run.terminal_pushed = true;
            break;
        }
        run.records.push(IterationRecord {
            iter: k,
            fval,
            grad_norm: gk,
            r_k: rep.d.norm(),
            lambda_k: rep.lambda_star,
            trace_g: trace_h,
            restart: false,
            time_s: t_k,
        });
        x += rep.d;
        grad = f.gradient(&x);
    }
    let row = IterationRecord {
        iter: run.records.len(),
        fval: f.value(&x),
        grad_norm: grad.norm(),
        r_k: 0.0,
        lambda_k: 0.0,
        trace_g: 0.0,
        restart: false,
        time_s: run.start.elapsed().as_secs_f64(),
    };
    Ok(run.finish(x, row, cfg.stationarity_tol))
}
