//! Independent reference computations used by verification suites.
//!
//! Everything here deliberately avoids the code paths it is meant to check:
//! derivatives come from finite differences, the cubic step from an
//! eigenbasis secular equation instead of Cholesky bisection, and averaged
//! Hessians from quadrature instead of algebraic identities.

use crate::matrix::SymMatrix;
use crate::problems::SmoothOracle;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: &dyn SmoothOracle, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let n = x.len();
    let mut g = DVector::zeros(n);
    let mut xp = x.clone();
    for i in 0..n {
        let step = h * x[i].abs().max(1.0);
        xp[i] = x[i] + step;
        let fp = f.value(&xp);
        xp[i] = x[i] - step;
        let fm = f.value(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * step);
    }
    g
}

/// Central-difference Hessian of `f` at `x`, built column-wise from the
/// analytic gradient and symmetrized.
pub fn fd_hessian(f: &dyn SmoothOracle, x: &DVector<f64>, h: f64) -> SymMatrix {
    let n = x.len();
    let mut m = DMatrix::zeros(n, n);
    let mut xp = x.clone();
    for j in 0..n {
        let step = h * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        let gp = f.gradient(&xp);
        xp[j] = x[j] - step;
        let gm = f.gradient(&xp);
        xp[j] = x[j];
        let col = (gp - gm) / (2.0 * step);
        m.set_column(j, &col);
    }
    SymMatrix::from_dense(m)
}

/// 4-point Gauss-Legendre nodes and weights on [-1, 1].
const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_85,
    0.652_145_154_862_546_2,
    0.652_145_154_862_546_2,
    0.347_854_845_137_453_85,
];

/// Minimum number of quadrature panels; 16 panels of the 4-point rule give
/// the base 64-node rule.
pub const QUAD_PANELS: usize = 16;

/// Averaged Hessian along a step: `J = integral_0^1 hess f(x + t u) dt`,
/// by composite Gauss-Legendre quadrature. At least 64 nodes; the panel
/// count grows with the segment length so the node density per unit of arc
/// stays fixed, keeping the error far below the audit tolerances this feeds
/// even on long early steps.
pub fn averaged_hessian(f: &dyn SmoothOracle, x: &DVector<f64>, u: &DVector<f64>) -> SymMatrix {
    let n = x.len();
    let panels = ((QUAD_PANELS as f64 * u.norm()).ceil() as usize)
        .clamp(QUAD_PANELS, 64 * QUAD_PANELS);
    let mut acc = DMatrix::zeros(n, n);
    let panel = 1.0 / panels as f64;
    for p in 0..panels {
        let a = p as f64 * panel;
        for (node, weight) in GL4_NODES.iter().zip(GL4_WEIGHTS.iter()) {
            let t = a + 0.5 * panel * (node + 1.0);
            let h = f.hessian(&(x + u * t));
            acc += h.as_matrix() * (weight * 0.5 * panel);
        }
    }
    SymMatrix::from_dense(acc)
}

/// Cubic model minimizer through the eigenbasis secular equation. With
/// `H = Q diag(lam) Q'` and `c = Q' grad`, the radius solves
/// `sum_i c_i^2 / (lam_i + M r)^2 = r^2`; the left side is decreasing in `r`,
/// so plain bisection converges. Returns the step and its norm.
pub fn secular_cubic_step(
    grad: &DVector<f64>,
    h: &SymMatrix,
    m_weight: f64,
) -> (DVector<f64>, f64) {
    let n = grad.len();
    if grad.norm() == 0.0 {
        return (DVector::zeros(n), 0.0);
    }
    let eig = h.as_matrix().clone().symmetric_eigen();
    let c = eig.eigenvectors.transpose() * grad;
    let lam = &eig.eigenvalues;

    let radius_gap = |r: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            let denom = lam[i] + m_weight * r;
            s += (c[i] / denom).powi(2);
        }
        s.sqrt() - r
    };

    let r = if m_weight == 0.0 {
        radius_gap(0.0)
    } else {
        let mut lo = 0.0;
        let mut hi = radius_gap(0.0).max(1e-300);
        while radius_gap(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if radius_gap(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let mut d_eig = DVector::zeros(n);
    for i in 0..n {
        d_eig[i] = -c[i] / (lam[i] + m_weight * r);
    }
    let d = &eig.eigenvectors * d_eig;
    (d, r)
}

/// Random symmetric positive-definite matrix with spectrum inside
/// `[lo, hi]`: a random orthogonal basis (QR of a Gaussian matrix) with
/// uniform eigenvalues.
pub fn random_spd_with_bounds<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> SymMatrix {
    assert!(0.0 < lo && lo <= hi);
    let gauss = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = gauss.qr().q();
    let eigs = DVector::from_fn(n, |_, _| rng.gen_range(lo..=hi));
    let m = &q * DMatrix::from_diagonal(&eigs) * q.transpose();
    SymMatrix::from_dense(m)
}

/// Random `(J, G, u)` with `J` positive definite and `G - J` positive
/// semidefinite, the setting in which a metric update must preserve the
/// dominance order. `G = J + Q diag(extra) Q'` with `extra >= 0`.
pub fn random_dominated_pair<R: Rng>(
    n: usize,
    mu: f64,
    lip: f64,
    rng: &mut R,
) -> (SymMatrix, SymMatrix, DVector<f64>) {
    let j = random_spd_with_bounds(n, mu, lip, rng);
    let gauss = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = gauss.qr().q();
    let extra = DVector::from_fn(n, |_, _| rng.gen_range(0.0..=lip));
    let bump = &q * DMatrix::from_diagonal(&extra) * q.transpose();
    let g = SymMatrix::from_dense(j.as_matrix() + bump);
    let u = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (j, g, u)
}
