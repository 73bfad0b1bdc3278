//! Diagonal-thresholding initialisation: keep the coordinates whose sample
//! variance clears `σ²(1 + α_n)`, diagonalise the selected block and pad the
//! eigenvectors with zeros back to length `p`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, OrthoBasis};
use crate::model::SampleCovWithN;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitResult {
    /// Selected coordinates `B`, sorted.
    pub b_set: Vec<usize>,
    /// `ℓ^B_j = λ_j(S_BB) ∨ 1`, one per selected coordinate. Entries past
    /// `card(B)` are 1 by convention; see [`InitResult::ell`].
    pub ell_b: Vec<f64>,
    /// `p x card(B)` eigenvectors of `S_BB`, zero outside `B`.
    pub q0: OrthoBasis,
    pub alpha_n: f64,
}

impl InitResult {
    /// `ℓ^B_j` for 0-based `j`, padded with 1 beyond `card(B)`.
    pub fn ell(&self, j: usize) -> f64 {
        padded_ell(&self.ell_b, j)
    }

    pub fn card_b(&self) -> usize {
        self.b_set.len()
    }
}

pub(crate) fn padded_ell(ell_b: &[f64], j: usize) -> f64 {
    ell_b.get(j).copied().unwrap_or(1.0)
}

/// `log(p ∨ n)`, natural log.
pub fn log_pn(p: usize, n: usize) -> f64 {
    (p.max(n) as f64).ln()
}

/// Screening level `α_n = α sqrt(log(p ∨ n) / n)`.
pub fn alpha_n(alpha: f64, p: usize, n: usize) -> f64 {
    alpha * (log_pn(p, n) / n as f64).sqrt()
}

pub fn dtspca(s: &SampleCovWithN, alpha: f64, sigma2: f64) -> Result<InitResult> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::invalid(format!("sigma2 must be positive, got {sigma2}")));
    }
    if s.n < 2 {
        return Err(Error::invalid("sample size must be at least 2"));
    }
    let p = s.p();
    let a_n = alpha_n(alpha, p, s.n);
    let cutoff = sigma2 * (1.0 + a_n);
    let diag = s.s.diag();
    let b_set: Vec<usize> = (0..p).filter(|&i| diag[i] >= cutoff).collect();
    if b_set.is_empty() {
        let max_diag = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::EmptySelection {
            alpha_n: a_n,
            max_diag,
        });
    }

    let (vals, vecs) = sym_eigen(&s.s.submatrix(&b_set))?;
    let ell_b = vals.iter().map(|v| v.max(1.0)).collect();
    let k = b_set.len();
    let mut q0 = Array2::zeros((p, k));
    for (r, &i) in b_set.iter().enumerate() {
        q0.row_mut(i).assign(&vecs.view().row(r));
    }
    Ok(InitResult {
        b_set,
        ell_b,
        q0: OrthoBasis::from_unchecked(q0),
        alpha_n: a_n,
    })
}
