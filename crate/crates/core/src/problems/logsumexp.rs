//! Regularized log-sum-exp objective.

use super::{DataError, Dataset, SmoothOracle};
use crate::matrix::SymMatrix;
use nalgebra::{DMatrix, DVector};

/// `f(x) = log sum_i exp(a_i'x - b_i) + (mu/2)|x|^2`, evaluated with
/// max-subtraction. Constants: `L = mu + 2 sum_i |a_i|^2`, `L_H = 2`.
#[derive(Debug)]
pub struct LogSumExp {
    data: Dataset,
    mu: f64,
    lip_grad: f64,
}

pub fn make_logsumexp(data: Dataset, mu: f64) -> Result<LogSumExp, DataError> {
    assert!(mu > 0.0, "mu must be positive");
    if data.m() == 0 {
        return Err(DataError::Empty);
    }
    let sum_sq: f64 = (0..data.m()).map(|i| data.row(i).norm_squared()).sum();
    Ok(LogSumExp {
        data,
        mu,
        lip_grad: mu + 2.0 * sum_sq,
    })
}

impl LogSumExp {
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Softmax weights of the shifted scores; sums to 1 by construction.
    fn softmax(&self, x: &DVector<f64>) -> (Vec<f64>, f64) {
        let scores: Vec<f64> = (0..self.data.m())
            .map(|i| self.data.features().row(i).transpose().dot(x) - self.data.labels()[i])
            .collect();
        let peak = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = scores.iter().map(|s| (s - peak).exp()).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        (weights, peak + total.ln())
    }
}

impl SmoothOracle for LogSumExp {
    fn dim(&self) -> usize {
        self.data.n()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let (_, lse) = self.softmax(x);
        lse + 0.5 * self.mu * x.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let (weights, _) = self.softmax(x);
        let mut grad = x * self.mu;
        for (i, w) in weights.iter().enumerate() {
            grad.axpy(*w, &self.data.row(i), 1.0);
        }
        grad
    }

    fn hessian(&self, x: &DVector<f64>) -> SymMatrix {
        let (weights, _) = self.softmax(x);
        let n = self.dim();
        let mut h = DMatrix::identity(n, n) * self.mu;
        let mut mean = DVector::zeros(n);
        for (i, w) in weights.iter().enumerate() {
            let a = self.data.row(i);
            h.ger(*w, &a, &a, 1.0);
            mean.axpy(*w, &a, 1.0);
        }
        h.ger(-1.0, &mean, &mean, 1.0);
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
