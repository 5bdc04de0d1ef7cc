//! Dense symmetric-matrix kernel: the SR1 metric update, its trace potential
//! and measurement function, Loewner-order checks, and positive-definite
//! solves with optional Sherman-Morrison inverse maintenance.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

/// Relative threshold below which the SR1 denominator is treated as zero.
pub const DEFAULT_SKIP_TOL: f64 = 1e-12;

/// Relative gap of the rank-1 inverse-update denominator below which the
/// maintained inverse is refactored instead of updated.
const INVERSE_GAP_TOL: f64 = 1e-6;

/// Running bound on the max-entry residual of the maintained inverse above
/// which it is refactored. The bound grows by `|Rw|_inf |G^-1 w|_inf / |s -
/// w' G^-1 w|` per rank-1 update (the exact residual propagation of the
/// update identity) plus a fixed slop for the arithmetic itself.
const INV_RESIDUAL_BUDGET: f64 = 2e-9;

/// Per-update floating-point slop added to the inverse-residual bound.
const RANK1_FP_SLOP: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("SR1 denominator u'w = {0:.6e} is negative beyond tolerance; curvature target exceeds the metric")]
    NegativeCurvature(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Dense symmetric matrix. Every constructor and update re-symmetrizes, so
/// `get(i, j) == get(j, i)` holds exactly at all times.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "dimension must be positive");
        SymMatrix {
            m: DMatrix::identity(n, n),
        }
    }

    /// `c` times the identity.
    pub fn scaled_identity(n: usize, c: f64) -> Self {
        assert!(n >= 1, "dimension must be positive");
        SymMatrix {
            m: DMatrix::identity(n, n) * c,
        }
    }

    /// Builds from a dense matrix, symmetrizing as `(M + M') / 2`.
    pub fn from_dense(m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
        assert!(m.nrows() >= 1, "dimension must be positive");
        let mut s = SymMatrix { m };
        s.symmetrize();
        s
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "dimension must be positive");
        SymMatrix {
            m: DMatrix::from_diagonal(&DVector::from_row_slice(diag)),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.m * v
    }

    /// `self + lambda * I`.
    pub fn shifted(&self, lambda: f64) -> SymMatrix {
        let mut m = self.m.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += lambda;
        }
        SymMatrix { m }
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix { m: &self.m * c }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn cholesky(&self) -> Option<Cholesky<f64, Dyn>> {
        Cholesky::new(self.m.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.is_finite())
    }

    fn symmetrize(&mut self) {
        let n = self.m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.m[(i, j)] + self.m[(j, i)]);
                self.m[(i, j)] = v;
                self.m[(j, i)] = v;
            }
        }
    }

    /// `self - w w' / s`, re-symmetrized.
    fn rank1_sub(&self, w: &DVector<f64>, s: f64) -> SymMatrix {
        let mut m = self.m.clone();
        m.ger(-1.0 / s, w, w, 1.0);
        let mut out = SymMatrix { m };
        out.symmetrize();
        out
    }
}

fn check_vec(v: &DVector<f64>, name: &'static str, dim: usize) -> Result<(), MatrixError> {
    if v.len() != dim {
        return Err(MatrixError::DimensionMismatch {
            expected: dim,
            got: v.len(),
        });
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(MatrixError::NonFinite(name));
    }
    Ok(())
}

/// SR1 update of the metric `G` toward the curvature target `A` observed only
/// through its action `y = A u`. With `w = G u - y` the result is
/// `G - w w' / (u' w)`; when `u' w` vanishes relative to `|u||w|` the update
/// degenerates and `G` is returned unchanged. A significantly negative
/// denominator means `A` is not dominated by `G` and is rejected as a caller
/// bug.
pub fn sr1_update(
    g: &SymMatrix,
    u: &DVector<f64>,
    y: &DVector<f64>,
    skip_tol: f64,
) -> Result<SymMatrix, MatrixError> {
    if !g.is_finite() {
        return Err(MatrixError::NonFinite("G"));
    }
    check_vec(u, "u", g.dim())?;
    check_vec(y, "y", g.dim())?;
    let w = g.mul_vec(u) - y;
    let s = u.dot(&w);
    let thr = skip_tol * u.norm() * w.norm();
    if s < -thr {
        return Err(MatrixError::NegativeCurvature(s));
    }
    if s <= thr {
        return Ok(g.clone());
    }
    Ok(g.rank1_sub(&w, s))
}

/// Measurement of the update quality: `|w|^2 / (u' w)` with `w = G u - y`,
/// and zero in the degenerate case. Equals the trace drop across
/// `sr1_update` with the same arguments.
pub fn nu_measure(g: &SymMatrix, u: &DVector<f64>, y: &DVector<f64>) -> Result<f64, MatrixError> {
    if !g.is_finite() {
        return Err(MatrixError::NonFinite("G"));
    }
    check_vec(u, "u", g.dim())?;
    check_vec(y, "y", g.dim())?;
    let w = g.mul_vec(u) - y;
    let s = u.dot(&w);
    let thr = DEFAULT_SKIP_TOL * u.norm() * w.norm();
    if s < -thr {
        return Err(MatrixError::NegativeCurvature(s));
    }
    if s <= thr {
        return Ok(0.0);
    }
    Ok(w.norm_squared() / s)
}

/// The potential `V(G) = trace G`.
pub fn trace_potential(g: &SymMatrix) -> f64 {
    g.trace()
}

/// Smallest eigenvalue of `B - A`, the margin by which `A` precedes `B` in
/// the Loewner order. Nonnegative iff `A` is dominated by `B`.
pub fn order_margin(a: &SymMatrix, b: &SymMatrix) -> f64 {
    assert_eq!(a.dim(), b.dim(), "order check requires equal dimensions");
    let diff = SymMatrix {
        m: b.as_matrix() - a.as_matrix(),
    };
    diff.min_eigenvalue()
}

/// True iff `A` precedes `B` in the Loewner order up to `tol`.
pub fn loewner_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> bool {
    order_margin(a, b) >= -tol
}

/// Solves `G d = rhs` for positive-definite `G` by Cholesky factorization,
/// with one step of iterative refinement to hold the residual near machine
/// precision.
pub fn solve_metric(g: &SymMatrix, rhs: &DVector<f64>) -> Result<DVector<f64>, MatrixError> {
    check_vec(rhs, "rhs", g.dim())?;
    let chol = g.cholesky().ok_or(MatrixError::NotPositiveDefinite)?;
    let mut d = chol.solve(rhs);
    let resid = rhs - g.mul_vec(&d);
    if resid.norm() > 1e-13 * rhs.norm() {
        d += chol.solve(&resid);
    }
    Ok(d)
}

/// How the correction factor inflates the base metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    /// Corrected metric is `G + lambda * I`.
    Additive,
    /// Corrected metric is `(1 + lambda) * G`.
    Multiplicative,
}

/// The SR1 metric together with its correction factor, cached trace of the
/// corrected metric, and an optional maintained inverse of the corrected
/// metric.
#[derive(Debug, Clone)]
pub struct MetricState {
    metric: SymMatrix,
    lambda: f64,
    correction: Correction,
    r_prev: f64,
    trace_cache: f64,
    inv_cache: Option<SymMatrix>,
    fallbacks: u32,
    inv_residual_bound: f64,
}

impl MetricState {
    pub fn new(
        metric: SymMatrix,
        lambda: f64,
        correction: Correction,
        with_inverse: bool,
    ) -> Result<Self, MatrixError> {
        let mut state = MetricState {
            metric,
            lambda,
            correction,
            r_prev: 0.0,
            trace_cache: 0.0,
            inv_cache: None,
            fallbacks: 0,
            inv_residual_bound: 0.0,
        };
        state.trace_cache = state.corrected_trace_direct();
        if with_inverse {
            state.refresh_inverse()?;
        }
        Ok(state)
    }

    /// Fresh state after a restart: base metric `l * I` with zero correction.
    pub fn restart(l: f64, n: usize, correction: Correction, with_inverse: bool) -> Self {
        let mut state = MetricState {
            metric: SymMatrix::scaled_identity(n, l),
            lambda: 0.0,
            correction,
            r_prev: 0.0,
            trace_cache: l * n as f64,
            inv_cache: None,
            fallbacks: 0,
            inv_residual_bound: 0.0,
        };
        if with_inverse {
            state.inv_cache = Some(SymMatrix::scaled_identity(n, 1.0 / l));
        }
        state
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// The base SR1 metric `G` before correction.
    pub fn base(&self) -> &SymMatrix {
        &self.metric
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn correction(&self) -> Correction {
        self.correction
    }

    pub fn r_prev(&self) -> f64 {
        self.r_prev
    }

    pub fn set_r_prev(&mut self, r: f64) {
        self.r_prev = r;
    }

    pub fn fallbacks(&self) -> u32 {
        self.fallbacks
    }

    pub fn has_inverse(&self) -> bool {
        self.inv_cache.is_some()
    }

    /// Trace of the corrected metric (cached, O(1)).
    pub fn trace_cache(&self) -> f64 {
        self.trace_cache
    }

    /// Materializes the corrected metric.
    pub fn corrected(&self) -> SymMatrix {
        match self.correction {
            Correction::Additive => self.metric.shifted(self.lambda),
            Correction::Multiplicative => self.metric.scaled(1.0 + self.lambda),
        }
    }

    /// Action of the corrected metric without materializing it.
    pub fn corrected_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        match self.correction {
            Correction::Additive => self.metric.mul_vec(v) + v * self.lambda,
            Correction::Multiplicative => self.metric.mul_vec(v) * (1.0 + self.lambda),
        }
    }

    fn corrected_trace_direct(&self) -> f64 {
        match self.correction {
            Correction::Additive => self.metric.trace() + self.lambda * self.dim() as f64,
            Correction::Multiplicative => (1.0 + self.lambda) * self.metric.trace(),
        }
    }

    /// Solves `corrected * d = rhs` through the cached inverse when present,
    /// otherwise by factorization.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, MatrixError> {
        match &self.inv_cache {
            Some(inv) => Ok(inv.mul_vec(rhs)),
            None => solve_metric(&self.corrected(), rhs),
        }
    }

    /// Largest residual entry of `corrected * inv - I`, when an inverse is
    /// maintained.
    pub fn inverse_residual(&self) -> Option<f64> {
        let inv = self.inv_cache.as_ref()?;
        let prod = self.corrected().as_matrix() * inv.as_matrix();
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - target).abs());
            }
        }
        Some(worst)
    }

    /// Rebuilds the cached inverse from a fresh factorization of the
    /// corrected metric and rebases the residual bound on the measured
    /// residual of the rebuilt inverse.
    pub fn refresh_inverse(&mut self) -> Result<(), MatrixError> {
        let corrected = self.corrected();
        let chol = corrected.cholesky().ok_or(MatrixError::NotPositiveDefinite)?;
        self.inv_cache = Some(SymMatrix::from_dense(chol.inverse()));
        self.inv_residual_bound = self.inverse_residual().unwrap_or(0.0);
        Ok(())
    }

    /// Degenerate advance: the base metric absorbs the current correction
    /// unchanged and `lambda_next` takes over. A maintained inverse stays
    /// valid under multiplicative correction through scalar rescaling and is
    /// dropped under additive correction.
    pub fn carry(&mut self, lambda_next: f64) {
        self.metric = self.corrected();
        self.lambda = lambda_next;
        self.trace_cache = self.corrected_trace_direct();
        if let Some(inv) = self.inv_cache.take() {
            if self.correction == Correction::Multiplicative {
                self.inv_cache = Some(inv.scaled(1.0 / (1.0 + lambda_next)));
            }
        }
    }

    /// Advances the state: the base metric becomes the SR1 update of the
    /// current corrected metric and `lambda_next` takes over as correction
    /// factor. Any cached inverse is dropped.
    pub fn advance(
        &mut self,
        u: &DVector<f64>,
        y: &DVector<f64>,
        lambda_next: f64,
        skip_tol: f64,
    ) -> Result<(), MatrixError> {
        self.metric = sr1_update(&self.corrected(), u, y, skip_tol)?;
        self.lambda = lambda_next;
        self.trace_cache = self.corrected_trace_direct();
        self.inv_cache = None;
        Ok(())
    }

    /// Same advance as [`MetricState::advance`] but keeps the inverse of the
    /// corrected metric current through the rank-1 inverse-update identity
    /// plus scalar rescaling. Refactors instead when the rank-1 denominator
    /// degenerates (counted as a fallback) or when the accumulated residual
    /// bound of the maintained inverse would leave its budget.
    pub fn sm_inverse_update(
        &mut self,
        u: &DVector<f64>,
        y: &DVector<f64>,
        lambda_next: f64,
        skip_tol: f64,
    ) -> Result<(), MatrixError> {
        debug_assert_eq!(self.correction, Correction::Multiplicative);
        let corrected = self.corrected();
        if !corrected.is_finite() {
            return Err(MatrixError::NonFinite("G"));
        }
        check_vec(u, "u", corrected.dim())?;
        check_vec(y, "y", corrected.dim())?;
        let inv = match self.inv_cache.take() {
            Some(inv) => inv,
            None => {
                // No inverse yet; advance and factor from scratch.
                self.fallbacks += 1;
                self.advance(u, y, lambda_next, skip_tol)?;
                return self.refresh_inverse();
            }
        };

        let w = corrected.mul_vec(u) - y;
        let s = u.dot(&w);
        let thr = skip_tol * u.norm() * w.norm();
        if s < -thr {
            return Err(MatrixError::NegativeCurvature(s));
        }
        let rescale = 1.0 / (1.0 + lambda_next);
        if s <= thr {
            // Degenerate update: metric unchanged, inverse only rescales.
            self.metric = corrected;
            self.lambda = lambda_next;
            self.trace_cache = self.corrected_trace_direct();
            self.inv_cache = Some(inv.scaled(rescale));
            return Ok(());
        }

        self.metric = corrected.rank1_sub(&w, s);
        self.lambda = lambda_next;
        self.trace_cache = self.corrected_trace_direct();

        // (G - w w'/s)^{-1} = G^{-1} + (G^{-1} w)(G^{-1} w)' / (s - w' G^{-1} w)
        let iw = inv.mul_vec(&w);
        let wiw = w.dot(&iw);
        let denom = s - wiw;
        if denom.abs() <= INVERSE_GAP_TOL * s.abs().max(wiw.abs()) {
            self.fallbacks += 1;
            return self.refresh_inverse();
        }
        // Residual propagation of the pair of rank-1 updates is exactly
        // R_next = R + (R w)(G^{-1} w)' / denom with R = I - G G^{-1}, so
        // the max-entry residual grows by at most |Rw|_inf |iw|_inf / |denom|
        // per update. Refactor once the accumulated bound leaves the budget.
        let rw = &w - corrected.mul_vec(&iw);
        let growth = rw.amax() * iw.amax() / denom.abs();
        let bound_next = self.inv_residual_bound + growth + RANK1_FP_SLOP;
        if bound_next > INV_RESIDUAL_BUDGET {
            return self.refresh_inverse();
        }
        let mut inv_next = inv.as_matrix().clone();
        inv_next.ger(1.0 / denom, &iw, &iw, 1.0);
        self.inv_cache = Some(SymMatrix::from_dense(inv_next * rescale));
        self.inv_residual_bound = bound_next;
        Ok(())
    }
}
