//! Regularized logistic-regression objective.

use super::{DataError, Dataset, SmoothOracle};
use crate::matrix::SymMatrix;
use nalgebra::{DMatrix, DVector};

/// `f(x) = (1/m) sum_i log(1 + exp(-b_i a_i'x)) + (mu/2)|x|^2` with labels in
/// `{-1,+1}`. Constants: `L = mu + 2 sum_i |a_i|^2`, `L_H = 2`.
#[derive(Debug)]
pub struct Logistic {
    data: Dataset,
    mu: f64,
    lip_grad: f64,
}

pub fn make_logistic(data: Dataset, mu: f64) -> Result<Logistic, DataError> {
    assert!(mu > 0.0, "mu must be positive");
    data.validate_binary_labels()?;
    let sum_sq: f64 = (0..data.m()).map(|i| data.row(i).norm_squared()).sum();
    Ok(Logistic {
        data,
        mu,
        lip_grad: mu + 2.0 * sum_sq,
    })
}

/// log(1 + exp(-t)) without overflow for large |t|.
fn log1p_exp_neg(t: f64) -> f64 {
    if t >= 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

/// sigma(-t) = 1 / (1 + exp(t)), evaluated stably.
fn sigmoid_neg(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

impl Logistic {
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    fn margins(&self, x: &DVector<f64>) -> Vec<f64> {
        (0..self.data.m())
            .map(|i| self.data.labels()[i] * self.data.features().row(i).transpose().dot(x))
            .collect()
    }
}

impl SmoothOracle for Logistic {
    fn dim(&self) -> usize {
        self.data.n()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let m = self.data.m() as f64;
        let loss: f64 = self.margins(x).iter().map(|&t| log1p_exp_neg(t)).sum();
        loss / m + 0.5 * self.mu * x.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = self.data.m() as f64;
        let mut grad = x * self.mu;
        for (i, &t) in self.margins(x).iter().enumerate() {
            let coeff = -self.data.labels()[i] * sigmoid_neg(t) / m;
            grad.axpy(coeff, &self.data.row(i), 1.0);
        }
        grad
    }

    fn hessian(&self, x: &DVector<f64>) -> SymMatrix {
        let m = self.data.m() as f64;
        let n = self.dim();
        let mut h = DMatrix::identity(n, n) * self.mu;
        for (i, &t) in self.margins(x).iter().enumerate() {
            let s = sigmoid_neg(t);
            let a = self.data.row(i);
            h.ger(s * (1.0 - s) / m, &a, &a, 1.0);
        }
        SymMatrix::from_dense(h)
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn lip_grad(&self) -> f64 {
        self.lip_grad
    }

    fn lip_hess(&self) -> f64 {
        2.0
    }
}
