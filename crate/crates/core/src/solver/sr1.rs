//! The three regularized SR1 proximal quasi-Newton drivers.
//!
//! All three share the same backbone: solve the model subproblem in the
//! corrected metric, form the stationarity certificate
//! `F'(x_{k+1}) = grad f(x_{k+1}) - grad f(x_k) - G_tilde u`, update the
//! metric by the SR1 rule in the corrected metric, and install the next
//! correction factor. They differ in how the correction factor is computed
//! (from the previous two step norms for the cubic method, from the
//! certificate norm for the gradient-regularized ones), in whether the
//! correction enters additively or multiplicatively, and in whether the
//! trace budget triggers restarts.

use super::{
    check_common, restart_needed, stationarity_measure, IterationRecord, MetricSnapshot,
    SolverConfig, SolverError, Termination, Trajectory,
};
use crate::matrix::{solve_metric, sr1_update, Correction, MetricState, SymMatrix};
use crate::problems::{ProxTerm, SmoothOracle};
use crate::subproblem::{
    cubic_prox_step, cubic_step_smooth, metric_prox_step, CubicModel, InnerConfig, ShiftedProx,
    SubproblemReport,
};
use nalgebra::DVector;
use std::time::Instant;

/// Floor of the per-iteration inner tolerance `min(inner.tol, 0.01 * g_k)`.
const INNER_TOL_FLOOR: f64 = 1e-14;

fn effective_inner(cfg: &SolverConfig, gk: f64) -> InnerConfig {
    InnerConfig {
        tol: cfg.inner.tol.min(1e-2 * gk).max(INNER_TOL_FLOOR),
        max_iters: cfg.inner.max_iters,
    }
}

/// Cubic-regularized SR1 proximal quasi-Newton method. The model Hessian at
/// iteration `k` is `G_k + L_H r_{k-1} I` with cubic weight `L_H`; through
/// the cubic term's optimality the step lands in the corrected metric
/// `G_tilde_k = G_k + L_H (r_{k-1} + r_k) I`, which the SR1 update then
/// contracts.
pub fn cubic_sr1_pqn(
    f: &dyn SmoothOracle,
    g: &dyn ProxTerm,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    check_common(f, x0, cfg)?;
    let n = x0.len();
    let l = f.lip_grad();
    let lh = f.lip_hess();

    let start = Instant::now();
    let mut base = SymMatrix::scaled_identity(n, l);
    let mut r_prev = 0.0f64;
    let mut x = x0.clone();
    let mut grad = f.gradient(&x);
    let mut fval = f.value(&x) + g.value(&x);
    let g0 = stationarity_measure(f, g, &x, &grad);
    let g_ref = g0.max(1.0);
    let update_floor = cfg.update_floor(g_ref);
    let mut gk = g0;

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut snapshots: Vec<MetricSnapshot> = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut terminal_pushed = false;

    for k in 0..cfg.max_iters {
        let t_k = start.elapsed().as_secs_f64();
        if gk <= cfg.stationarity_tol * g_ref {
            records.push(IterationRecord {
                iter: k,
                fval,
                grad_norm: gk,
                r_k: 0.0,
                lambda_k: 0.0,
                trace_g: base.trace(),
                restart: false,
                time_s: t_k,
            });
            termination = Termination::StationarityReached;
            terminal_pushed = true;
            break;
        }

        let h = base.shifted(lh * r_prev);
        let model = CubicModel::new(grad.clone(), h, lh);
        let inner = effective_inner(cfg, gk);
        let rep: SubproblemReport = if g.is_zero() {
            cubic_step_smooth(&model, inner.tol)?
        } else {
            let shifted = ShiftedProx::new(g, &x);
            cubic_prox_step(&shifted, &model, &inner)?
        };
        if !rep.converged {
            records.push(IterationRecord {
                iter: k,
                fval,
                grad_norm: gk,
                r_k: 0.0,
                lambda_k: 0.0,
                trace_g: base.trace(),
                restart: false,
                time_s: t_k,
            });
            termination = Termination::SubproblemFailure;
            terminal_pushed = true;
            break;
        }

        let u = rep.d;
        let r = u.norm();
        let lambda_k = lh * (r_prev + r);
        let g_tilde = base.shifted(lambda_k);
        let x_next = &x + &u;
        let grad_next = f.gradient(&x_next);
        let y = &grad_next - &grad;
        let fprime = &y - g_tilde.mul_vec(&u);
        let gk1 = fprime.norm();

        records.push(IterationRecord {
            iter: k,
            fval,
            grad_norm: gk,
            r_k: r,
            lambda_k,
            trace_g: g_tilde.trace(),
            restart: false,
            time_s: t_k,
        });

        // The certificate F'(x_{k+1}) is exactly the SR1 residual direction;
        // below the update floor it is dominated by rounding error and the
        // update degenerates, so the metric is carried unchanged.
        let next_base = if gk1 <= update_floor {
            g_tilde.clone()
        } else {
            sr1_update(&g_tilde, &u, &y, cfg.skip_tol)?
        };
        if cfg.record_matrices {
            snapshots.push(MetricSnapshot {
                x: x.clone(),
                u,
                y,
                g_tilde,
                g_next: next_base.clone(),
                fprime_next: fprime,
                inclusion_residual: rep.residual,
                inv_residual: None,
            });
        }

        base = next_base;
        r_prev = r;
        x = x_next;
        grad = grad_next;
        fval = f.value(&x) + g.value(&x);
        gk = gk1;
    }

    if !terminal_pushed {
        if gk <= cfg.stationarity_tol * g_ref {
            termination = Termination::StationarityReached;
        }
        records.push(IterationRecord {
            iter: records.len(),
            fval,
            grad_norm: gk,
            r_k: 0.0,
            lambda_k: 0.0,
            trace_g: base.trace(),
            restart: false,
            time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(Trajectory {
        records,
        snapshots,
        final_x: x,
        termination,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum GradKind {
    /// Multiplicative correction `(1 + lambda) G`, factor scaled by `1/mu`.
    Scaled,
    /// Additive correction `G + lambda I`, unscaled factor.
    Shifted,
}

/// Gradient-regularized SR1 proximal quasi-Newton method with multiplicative
/// correction. On smooth problems the step is a single multiply by a
/// maintained inverse metric, kept current through rank-1 inverse updates.
pub fn grad_sr1_pqn(
    f: &dyn SmoothOracle,
    g: &dyn ProxTerm,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    grad_core(GradKind::Scaled, f, g, x0, cfg)
}

/// Gradient-regularized SR1 proximal quasi-Newton method with additive
/// correction. The corrected metric changes by a shift every iteration, so
/// each step solves a fresh factorization instead of reusing an inverse.
pub fn grad_reg_sr1_pqn(
    f: &dyn SmoothOracle,
    g: &dyn ProxTerm,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    grad_core(GradKind::Shifted, f, g, x0, cfg)
}

fn grad_core(
    kind: GradKind,
    f: &dyn SmoothOracle,
    g: &dyn ProxTerm,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    check_common(f, x0, cfg)?;
    let l = f.lip_grad();
    if !(cfg.kappa_bar >= l) {
        return Err(SolverError::Config(
            "kappa_bar must be at least the gradient Lipschitz constant".into(),
        ));
    }
    let n = x0.len();
    let lh = f.lip_hess();
    let mu = f.mu();
    let correction = match kind {
        GradKind::Scaled => Correction::Multiplicative,
        GradKind::Shifted => Correction::Additive,
    };
    let maintain_inverse = kind == GradKind::Scaled && g.is_zero();
    let mut state = MetricState::new(
        SymMatrix::scaled_identity(n, l),
        0.0,
        correction,
        maintain_inverse,
    )?;

    let start = Instant::now();
    let mut x = x0.clone();
    let mut grad = f.gradient(&x);
    let mut fval = f.value(&x) + g.value(&x);
    let g0 = stationarity_measure(f, g, &x, &grad);
    let g_ref = g0.max(1.0);
    let update_floor = cfg.update_floor(g_ref);
    let mut gk = g0;

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut snapshots: Vec<MetricSnapshot> = Vec::new();
    let mut lambda_seq = 0.0f64;
    let mut restart_flag = false;
    let mut termination = Termination::MaxIters;
    let mut terminal_pushed = false;

    for k in 0..cfg.max_iters {
        let t_k = start.elapsed().as_secs_f64();
        if gk <= cfg.stationarity_tol * g_ref {
            records.push(IterationRecord {
                iter: k,
                fval,
                grad_norm: gk,
                r_k: 0.0,
                lambda_k: lambda_seq,
                trace_g: state.trace_cache(),
                restart: restart_flag,
                time_s: t_k,
            });
            termination = Termination::StationarityReached;
            terminal_pushed = true;
            break;
        }

        let corrected = state.corrected();
        let (u, inclusion_residual, step_ok) = if g.is_zero() {
            let neg_grad = -&grad;
            let u = match kind {
                GradKind::Scaled => state.solve(&neg_grad)?,
                GradKind::Shifted => solve_metric(&corrected, &neg_grad)?,
            };
            let res = (corrected.mul_vec(&u) + &grad).norm();
            (u, res, true)
        } else {
            let shifted = ShiftedProx::new(g, &x);
            let rep = metric_prox_step(&shifted, &grad, &corrected, &effective_inner(cfg, gk))?;
            (rep.d, rep.residual, rep.converged)
        };
        if !step_ok {
            records.push(IterationRecord {
                iter: k,
                fval,
                grad_norm: gk,
                r_k: 0.0,
                lambda_k: lambda_seq,
                trace_g: state.trace_cache(),
                restart: restart_flag,
                time_s: t_k,
            });
            termination = Termination::SubproblemFailure;
            terminal_pushed = true;
            break;
        }

        let r = u.norm();
        let x_next = &x + &u;
        let grad_next = f.gradient(&x_next);
        let y = &grad_next - &grad;
        let fprime = &y - corrected.mul_vec(&u);
        let gk1 = fprime.norm();

        let lambda_next = match kind {
            GradKind::Scaled => ((lh * gk1).sqrt() + lh * r) / mu,
            GradKind::Shifted => (lh * gk1).sqrt() + lh * r,
        };

        // Candidate trace after the SR1 drop and the next correction,
        // computed in O(n) from quantities already at hand: w = -F' and
        // nu = |w|^2 / (u'w). A certificate below the update floor is
        // dominated by rounding error and degenerates the update.
        let s = -u.dot(&fprime);
        let force_skip = gk1 <= update_floor;
        let rel_skip = s <= cfg.skip_tol * u.norm() * gk1;
        let nu = if force_skip || rel_skip {
            0.0
        } else {
            gk1 * gk1 / s
        };
        let base_next_trace = state.trace_cache() - nu;
        let trace_hat = match kind {
            GradKind::Scaled => (1.0 + lambda_next) * base_next_trace,
            GradKind::Shifted => base_next_trace + lambda_next * n as f64,
        };
        let restart_next = restart_needed(trace_hat, n, cfg.kappa_bar);

        records.push(IterationRecord {
            iter: k,
            fval,
            grad_norm: gk,
            r_k: r,
            lambda_k: lambda_seq,
            trace_g: state.trace_cache(),
            restart: restart_flag,
            time_s: t_k,
        });

        if cfg.record_matrices {
            let g_next = if force_skip {
                corrected.clone()
            } else {
                sr1_update(&corrected, &u, &y, cfg.skip_tol)?
            };
            snapshots.push(MetricSnapshot {
                x: x.clone(),
                u: u.clone(),
                y: y.clone(),
                g_tilde: corrected.clone(),
                g_next,
                fprime_next: fprime.clone(),
                inclusion_residual,
                inv_residual: None,
            });
        }

        if restart_next {
            state = MetricState::restart(l, n, correction, maintain_inverse);
        } else if force_skip {
            state.carry(lambda_next);
        } else if maintain_inverse {
            state.sm_inverse_update(&u, &y, lambda_next, cfg.skip_tol)?;
        } else {
            state.advance(&u, &y, lambda_next, cfg.skip_tol)?;
        }
        state.set_r_prev(r);
        if cfg.record_matrices {
            if let Some(snap) = snapshots.last_mut() {
                snap.inv_residual = state.inverse_residual();
            }
        }

        lambda_seq = lambda_next;
        restart_flag = restart_next;
        x = x_next;
        grad = grad_next;
        fval = f.value(&x) + g.value(&x);
        gk = gk1;
    }

    if !terminal_pushed {
        if gk <= cfg.stationarity_tol * g_ref {
            termination = Termination::StationarityReached;
        }
        records.push(IterationRecord {
            iter: records.len(),
            fval,
            grad_norm: gk,
            r_k: 0.0,
            lambda_k: lambda_seq,
            trace_g: state.trace_cache(),
            restart: restart_flag,
            time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(Trajectory {
        records,
        snapshots,
        final_x: x,
        termination,
    })
}
