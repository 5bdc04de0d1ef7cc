//! Objective oracles and data handling: the smooth losses with their
//! curvature constants, nonsmooth proximal terms, dataset ingestion, and
//! synthetic problem generators.

mod dataset;
mod logistic;
mod logsumexp;
mod prox;
mod quadratic;
mod synth;

pub use dataset::{load_sparse_text, write_sparse_text, Dataset};
pub use logistic::{make_logistic, Logistic};
pub use logsumexp::{make_logsumexp, LogSumExp};
pub use prox::{make_l1_prox, L1Prox, ZeroProx};
pub use quadratic::Quadratic;
pub use synth::{gen_onehot_logistic, gen_random_logsumexp, mushrooms_layout, MUSHROOMS_M};

use crate::matrix::SymMatrix;
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty dataset")]
    Empty,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("label {0} is outside the {{-1,+1}} alphabet")]
    BadLabel(f64),
    #[error("non-finite value in dataset")]
    NonFinite,
}

/// Smooth part `f` of the composite objective, with the constants the solvers
/// rely on. Oracles are immutable after construction; concurrent read-only
/// evaluation is safe.
pub trait SmoothOracle: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Exact Hessian; used by the cubic Newton baseline and the audit
    /// quadrature, never by the quasi-Newton solvers.
    fn hessian(&self, x: &DVector<f64>) -> SymMatrix;
    /// Strong-convexity modulus.
    fn mu(&self) -> f64;
    /// Gradient Lipschitz constant (a stated upper bound, not the spectral
    /// optimum).
    fn lip_grad(&self) -> f64;
    /// Hessian Lipschitz constant.
    fn lip_hess(&self) -> f64;
}

/// Nonsmooth part `g`: convex, with a Euclidean proximal map
/// `prox(z, t) = argmin_x g(x) + |x - z|^2 / (2t)`.
pub trait ProxTerm: Sync {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn prox(&self, z: &DVector<f64>, t: f64) -> DVector<f64>;
    /// True for the zero term; lets solvers take the exact smooth path.
    fn is_zero(&self) -> bool {
        false
    }
}
