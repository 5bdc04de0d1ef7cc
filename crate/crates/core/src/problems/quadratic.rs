//! Quadratic objective with an explicit matrix, mainly for solver tests and
//! reference computations.

use super::SmoothOracle;
use crate::matrix::SymMatrix;
use nalgebra::DVector;

/// `f(x) = x'Ax/2 - b'x` for positive-definite `A`. The Hessian Lipschitz
/// constant is zero, so cubic weights vanish and regularized methods reduce
/// to their pure quasi-Newton cores.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: SymMatrix,
    b: DVector<f64>,
    mu: f64,
    lip_grad: f64,
}

impl Quadratic {
    /// `mu` and `l` must bound the eigenvalues of `a` from below and above.
    pub fn new(a: SymMatrix, b: DVector<f64>, mu: f64, l: f64) -> Self {
        assert_eq!(a.dim(), b.len());
        assert!(mu > 0.0 && l >= mu);
        Quadratic {
            a,
            b,
            mu,
            lip_grad: l,
        }
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.a
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.b
    }
}

impl SmoothOracle for Quadratic {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&self.a.mul_vec(x)) - self.b.dot(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.mul_vec(x) - &self.b
    }

    fn hessian(&self, _x: &DVector<f64>) -> SymMatrix {
        self.a.clone()
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn lip_grad(&self) -> f64 {
        self.lip_grad
    }

    fn lip_hess(&self) -> f64 {
        0.0
    }
}
