//! Estimating the number of spikes and choosing the subspace dimension from
//! the screened eigenvalues `ℓ^B_j`.

use serde::{Deserialize, Serialize};

use crate::dtspca::{log_pn, padded_ell, InitResult};

pub const DEFAULT_KAPPA_BAR: f64 = 15.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEstimate {
    pub nspike_hat: usize,
    pub m_selected: usize,
    /// `δ_card(B)`, the excess over 1 an eigenvalue must clear to count as a spike.
    pub delta: f64,
    /// `(ℓ₁ − 1) / (ℓ_j − ℓ_{j+1})` for `j = 1..n̄̂`; `+∞` on ties.
    pub gap_ratios: Vec<f64>,
}

/// `t_k = sqrt(6 log(p ∨ n)/n + 2k (log(p ∨ n) + 1)/n)`.
pub fn t_k(k: usize, n: usize, p: usize) -> f64 {
    let l = log_pn(p, n);
    let n = n as f64;
    (6.0 * l / n + 2.0 * k as f64 * (l + 1.0) / n).sqrt()
}

/// `δ_k = 2(√(k/n) + t_k) + (√(k/n) + t_k)²`.
pub fn delta_k(k: usize, n: usize, p: usize) -> f64 {
    let u = (k as f64 / n as f64).sqrt() + t_k(k, n, p);
    2.0 * u + u * u
}

/// Largest `j` with `ℓ^B_j > 1 + δ_card(B)`, or 0.
pub fn estimate_nspike(init: &InitResult, n: usize, p: usize) -> usize {
    nspike_from_ell(&init.ell_b, init.card_b(), n, p)
}

pub(crate) fn nspike_from_ell(ell_b: &[f64], card_b: usize, n: usize, p: usize) -> usize {
    let cut = 1.0 + delta_k(card_b, n, p);
    (0..card_b)
        .filter(|&j| padded_ell(ell_b, j) > cut)
        .map(|j| j + 1)
        .max()
        .unwrap_or(0)
}

fn gap_ratio(ell_b: &[f64], j: usize) -> f64 {
    let gap = padded_ell(ell_b, j - 1) - padded_ell(ell_b, j);
    if gap > 0.0 {
        (padded_ell(ell_b, 0) - 1.0) / gap
    } else {
        f64::INFINITY
    }
}

/// Largest `j ≤ n̄̂` whose gap ratio is at most `κ̄`, or 0. The qualifying
/// set need not be contiguous.
pub fn select_m(init: &InitResult, nspike_hat: usize, kappa_bar: f64) -> usize {
    select_m_from_ell(&init.ell_b, nspike_hat, kappa_bar)
}

pub(crate) fn select_m_from_ell(ell_b: &[f64], nspike_hat: usize, kappa_bar: f64) -> usize {
    (1..=nspike_hat)
        .filter(|&j| {
            let r = gap_ratio(ell_b, j);
            r.is_finite() && r <= kappa_bar
        })
        .max()
        .unwrap_or(0)
}

pub fn estimate_rank(init: &InitResult, n: usize, p: usize, kappa_bar: f64) -> RankEstimate {
    let nspike_hat = estimate_nspike(init, n, p);
    RankEstimate {
        nspike_hat,
        m_selected: select_m(init, nspike_hat, kappa_bar),
        delta: delta_k(init.card_b(), n, p),
        gap_ratios: (1..=nspike_hat).map(|j| gap_ratio(&init.ell_b, j)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_example() {
        let l = 2048f64.ln();
        let t2 = 6.0 * l / 1024.0 + 10.0 * (l + 1.0) / 1024.0;
        assert!((t2 - 0.12887).abs() < 1e-4);
        assert!((t_k(5, 1024, 2048) - t2.sqrt()).abs() < 1e-15);
        assert!((delta_k(5, 1024, 2048) - 1.0417).abs() < 1e-3);
    }

    #[test]
    fn nspike_examples() {
        assert_eq!(nspike_from_ell(&[1.0; 5], 5, 1024, 2048), 0);
        assert_eq!(nspike_from_ell(&[30.0, 2.2, 1.5, 1.1, 1.0], 5, 1024, 2048), 2);
    }

    #[test]
    fn select_m_examples() {
        assert_eq!(select_m_from_ell(&[101.0, 81.0, 1.0], 0, 15.0), 0);
        assert_eq!(select_m_from_ell(&[101.0, 81.0, 1.0], 2, 15.0), 2);
        // j = 1 fails (ratio 200) but j = 2 qualifies: the maximum is taken
        assert_eq!(select_m_from_ell(&[101.0, 100.5, 1.0], 2, 15.0), 2);
        assert_eq!(select_m_from_ell(&[101.0, 100.5, 1.0], 1, 15.0), 0);
        // ties never qualify
        assert_eq!(select_m_from_ell(&[5.0, 5.0, 1.0], 1, f64::INFINITY), 0);
    }
}
