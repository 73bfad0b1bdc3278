//! Oracle quantities computed from a known model: per-spike noise scales
//! `τ_nj`, the high-signal coordinate set `H(β)`, the effective support
//! bound `M_n`, the parametric error terms `ε_nj` and weak-`ℓ_r` radii.
//!
//! These need the true loadings, so they serve tests and reports only.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::dtspca::log_pn;
use crate::error::{Error, Result};
use crate::itspca::h;
use crate::model::SpikedModel;

/// `β` used when `γ ≤ 2√3` would make `0.9 (γ − 2√3) / √m` nonpositive.
pub const BETA_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityClass {
    pub r: f64,
    /// One radius per spike, each at least 1.
    pub radii: Vec<f64>,
}

impl SparsityClass {
    /// Smallest radii (floored at 1) covering the model's loadings.
    pub fn of_model(model: &SpikedModel, r: f64) -> Result<Self> {
        check_r(r)?;
        let radii = (0..model.n_spikes())
            .map(|j| weak_lr_radius(model.eigvecs().column(j), r).max(1.0))
            .collect();
        Ok(SparsityClass { r, radii })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleQuantities {
    pub tau: Vec<f64>,
    pub h_set: Vec<usize>,
    pub m_n: f64,
    pub eps: Vec<f64>,
    pub beta: f64,
    pub sparsity: SparsityClass,
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 2.0) {
        return Err(Error::invalid(format!("r must lie in (0, 2), got {r}")));
    }
    Ok(())
}

/// `max_ν |u|_(ν) ν^{1/r}` over the magnitudes sorted in decreasing order.
pub fn weak_lr_radius(u: ArrayView1<'_, f64>, r: f64) -> f64 {
    let mut mags: Vec<f64> = u.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.iter()
        .enumerate()
        .map(|(i, m)| m * ((i + 1) as f64).powf(1.0 / r))
        .fold(0.0, f64::max)
}

/// `β = 0.9 (γ − 2√3) / √m`, floored at [`BETA_FLOOR`].
pub fn beta_for(gamma: f64, m: usize) -> f64 {
    let c = 0.9 * (gamma - 2.0 * 3f64.sqrt());
    (c / (m.max(1) as f64).sqrt()).max(BETA_FLOOR)
}

/// `τ_nj = sqrt(log(p ∨ n) / (n h(λ_j²)))`, with spikes measured in units of
/// the noise variance.
pub fn tau(model: &SpikedModel, n: usize) -> Vec<f64> {
    let base = log_pn(model.p(), n) / n as f64;
    model
        .spikes()
        .iter()
        .map(|s| (base / h(s / model.noise_var())).sqrt())
        .collect()
}

/// `H(β) = {ν : |q_νj| ≥ β τ_nj for some j}`.
pub fn high_signal_set(model: &SpikedModel, n: usize, beta: f64) -> Vec<usize> {
    let tau = tau(model, n);
    let q = model.eigvecs().view();
    (0..model.p())
        .filter(|&i| (0..model.n_spikes()).any(|j| q[[i, j]].abs() >= beta * tau[j]))
        .collect()
}

/// `ε_nj² = (λ₁² + 1)(λ_{j+1}² + 1) / (λ_j² − λ_{j+1}²)² · log(p ∨ n)/n`
/// with `λ_{n̄+1}² = 0`.
pub fn eps(model: &SpikedModel, n: usize) -> Vec<f64> {
    let base = log_pn(model.p(), n) / n as f64;
    let sp: Vec<f64> = model.spikes().iter().map(|s| s / model.noise_var()).collect();
    (0..sp.len())
        .map(|j| {
            let next = sp.get(j + 1).copied().unwrap_or(0.0);
            let gap = sp[j] - next;
            if gap <= 0.0 {
                f64::INFINITY
            } else {
                ((sp[0] + 1.0) * (next + 1.0) / (gap * gap) * base).sqrt()
            }
        })
        .collect()
}

pub fn oracle_quantities(
    model: &SpikedModel,
    n: usize,
    gamma: f64,
    m: usize,
    r: f64,
) -> Result<OracleQuantities> {
    if m == 0 || m > model.n_spikes() {
        return Err(Error::invalid(format!(
            "m = {m} must lie in 1..={}",
            model.n_spikes()
        )));
    }
    let sparsity = SparsityClass::of_model(model, r)?;
    let tau = tau(model, n);
    let beta = beta_for(gamma, m);
    let m_n = sparsity
        .radii
        .iter()
        .zip(&tau)
        .map(|(s, t)| s.powf(r) / t.powf(r))
        .sum::<f64>()
        .min(model.p() as f64);
    Ok(OracleQuantities {
        h_set: high_signal_set(model, n, beta),
        eps: eps(model, n),
        tau,
        m_n,
        beta,
        sparsity,
    })
}
