//! Proximal terms: the zero term and weighted l1.

use super::ProxTerm;
use nalgebra::DVector;

/// `g = 0`; prox is the identity.
#[derive(Debug, Clone, Copy)]
pub struct ZeroProx;

impl ProxTerm for ZeroProx {
    fn value(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn prox(&self, z: &DVector<f64>, _t: f64) -> DVector<f64> {
        z.clone()
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// `g(x) = weight * |x|_1`; prox is soft-thresholding at `weight * t`.
#[derive(Debug, Clone, Copy)]
pub struct L1Prox {
    weight: f64,
}

pub fn make_l1_prox(weight: f64) -> L1Prox {
    assert!(weight >= 0.0, "l1 weight must be nonnegative");
    L1Prox { weight }
}

impl L1Prox {
    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl ProxTerm for L1Prox {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.weight * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn prox(&self, z: &DVector<f64>, t: f64) -> DVector<f64> {
        let thr = self.weight * t;
        z.map(|v| {
            if v > thr {
                v - thr
            } else if v < -thr {
                v + thr
            } else {
                0.0
            }
        })
    }

    fn is_zero(&self) -> bool {
        self.weight == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_gives_identity_prox() {
        let g = make_l1_prox(0.0);
        let z = DVector::from_vec(vec![2.0, -0.5]);
        assert_eq!(g.prox(&z, 1.0), z);
        assert!(g.is_zero());
    }

    #[test]
    fn soft_threshold_shrinks_toward_zero() {
        let g = make_l1_prox(1.0);
        let out = g.prox(&DVector::from_vec(vec![2.0, -0.5]), 1.0);
        assert_eq!(out.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn prox_output_satisfies_subgradient_optimality() {
        // v = (z - p)/t must lie in the l1 subdifferential at p.
        let g = make_l1_prox(0.3);
        let z = DVector::from_vec(vec![1.5, -0.2, 0.0, -3.0]);
        let t = 0.7;
        let p = g.prox(&z, t);
        for i in 0..z.len() {
            let v = (z[i] - p[i]) / t;
            if p[i] > 0.0 {
                assert!((v - 0.3).abs() < 1e-15);
            } else if p[i] < 0.0 {
                assert!((v + 0.3).abs() < 1e-15);
            } else {
                assert!(v.abs() <= 0.3 + 1e-15);
            }
        }
    }
}
