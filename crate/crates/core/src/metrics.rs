use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{largest_principal_angle_sin2, OrthoBasis};

/// Outcome of one fit in one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub loss: f64,
    pub support_size: usize,
    pub iterations: usize,
    pub seed: u64,
}

/// Squared spectral distance between the projectors onto `ran(truth)` and
/// `ran(est)`; 1 when the dimensions differ.
pub fn subspace_loss(truth: &OrthoBasis, est: &OrthoBasis) -> Result<f64> {
    largest_principal_angle_sin2(truth, est)
}

const UNIT_TOL: f64 = 1e-8;

/// `‖q − sgn(qᵀq̂) q̂‖²` for unit vectors, with `sgn(0) = +1`.
pub fn eigvec_loss(q: ArrayView1<'_, f64>, qhat: ArrayView1<'_, f64>) -> Result<f64> {
    if q.len() != qhat.len() {
        return Err(Error::invalid(format!("vectors have lengths {} and {}", q.len(), qhat.len())));
    }
    for norm in [q.dot(&q).sqrt(), qhat.dot(&qhat).sqrt()] {
        if norm.is_nan() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::invalid(format!("vector is not unit norm (norm = {norm})")));
        }
    }
    let sign = if q.dot(&qhat) < 0.0 { -1.0 } else { 1.0 };
    Ok(q.iter().zip(qhat.iter()).map(|(a, b)| (a - sign * b).powi(2)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn subspace_examples() {
        let a = OrthoBasis::coordinate(2, &[0]).unwrap();
        let b = OrthoBasis::coordinate(2, &[1]).unwrap();
        assert_eq!(subspace_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(subspace_loss(&a, &b).unwrap(), 1.0);
        let h = 0.5f64.sqrt();
        let c = OrthoBasis::new(Array2::from_shape_vec((2, 1), vec![h, h]).unwrap()).unwrap();
        assert!((subspace_loss(&a, &c).unwrap() - 0.5).abs() < 1e-15);
        let d = OrthoBasis::coordinate(3, &[0]).unwrap();
        assert!(subspace_loss(&a, &d).is_err());
    }

    #[test]
    fn eigvec_examples() {
        let q = array![0.6, 0.8];
        assert_eq!(eigvec_loss(q.view(), q.view()).unwrap(), 0.0);
        let neg = -&q;
        assert_eq!(eigvec_loss(q.view(), neg.view()).unwrap(), 0.0);
        let orth = array![-0.8, 0.6];
        assert!((eigvec_loss(q.view(), orth.view()).unwrap() - 2.0).abs() < 1e-15);
        assert!(eigvec_loss(q.view(), array![1.0, 1.0].view()).is_err());
        assert!(eigvec_loss(q.view(), array![1.0].view()).is_err());
    }
}
