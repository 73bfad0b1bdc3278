//! Iterative thresholding sparse PCA.
//!
//! Each iteration multiplies the current basis by `S`, thresholds column `j`
//! of the product at level `γ_nj` and re-orthonormalises with a thin QR.
//! With all levels at zero this is plain orthogonal iteration.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dtspca::{log_pn, padded_ell, InitResult};
use crate::error::{Error, Result};
use crate::linalg::{largest_principal_angle_sin2, nonzero_rows, thin_qr, OrthoBasis, SymMatrix};
use crate::model::SampleCovWithN;
use crate::threshold::{threshold_in_place, ThresholdKind};

/// Lower bound on the safety cap used with empirical stopping.
pub const MIN_EMPIRICAL_CAP: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Stopping {
    /// Run exactly `K*` iterations.
    Theoretical,
    /// Stop once successive subspaces are within `tol` (default `n^-2`).
    Empirical { tol: Option<f64> },
    /// Run exactly `k` iterations.
    MaxIters(usize),
}

impl Default for Stopping {
    fn default() -> Self {
        Stopping::Empirical { tol: None }
    }
}

impl fmt::Display for Stopping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stopping::Theoretical => f.write_str("theoretical"),
            Stopping::Empirical { tol: None } => f.write_str("empirical"),
            Stopping::Empirical { tol: Some(t) } => write!(f, "empirical:{t:e}"),
            Stopping::MaxIters(k) => write!(f, "max_iters:{k}"),
        }
    }
}

impl FromStr for Stopping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("unknown stopping rule {s:?}"));
        match s {
            "theoretical" => Ok(Stopping::Theoretical),
            "empirical" => Ok(Stopping::Empirical { tol: None }),
            _ => {
                if let Some(t) = s.strip_prefix("empirical:") {
                    let tol: f64 = t.parse().map_err(|_| bad())?;
                    if !(tol.is_finite() && tol >= 0.0) {
                        return Err(bad());
                    }
                    Ok(Stopping::Empirical { tol: Some(tol) })
                } else if let Some(k) = s.strip_prefix("max_iters:") {
                    Ok(Stopping::MaxIters(k.parse().map_err(|_| bad())?))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl TryFrom<String> for Stopping {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Stopping> for String {
    fn from(s: Stopping) -> String {
        s.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub m: usize,
    pub kind: ThresholdKind,
    pub gamma: f64,
    pub stopping: Stopping,
    /// Safety cap on iterations. `None` uses `max(2 K*, 500)`.
    pub max_iters_cap: Option<usize>,
}

impl FitConfig {
    pub fn new(m: usize) -> Self {
        FitConfig {
            m,
            kind: ThresholdKind::Soft,
            gamma: 1.5,
            stopping: Stopping::default(),
            max_iters_cap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("target dimension m must be at least 1"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.max_iters_cap == Some(0) {
            return Err(Error::invalid("iteration cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ReachedKstar,
    EmpiricalConverged,
    ReachedMaxIters,
    CapHit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "FitResultJson", try_from = "FitResultJson")]
pub struct FitResult {
    pub basis: OrthoBasis,
    pub iterations: usize,
    pub support: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub ell_b: Vec<f64>,
    pub stop_reason: StopReason,
}

/// `γ_nj = γ sqrt(ℓ^B_j log(p ∨ n) / n)` for `j = 1..m`.
pub fn threshold_levels(ell_b: &[f64], m: usize, n: usize, p: usize, gamma: f64) -> Vec<f64> {
    let base = log_pn(p, n) / n as f64;
    (0..m)
        .map(|j| gamma * (padded_ell(ell_b, j) * base).sqrt())
        .collect()
}

/// `h(x) = x² / (x + 1)`.
pub fn h(x: f64) -> f64 {
    x * x / (x + 1.0)
}

/// The iteration count
/// `K* = 1.1 ℓ₁ / (ℓ_m − ℓ_{m+1}) · [(1 + 1/log 2) log n + 0 ∨ log h(ℓ₁ − 1)]`,
/// rounded up.
pub fn kstar(ell_b: &[f64], m: usize, n: usize) -> Result<usize> {
    kstar_with_log_n(ell_b, m, (n as f64).ln())
}

pub(crate) fn kstar_with_log_n(ell_b: &[f64], m: usize, log_n: f64) -> Result<usize> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    let l1 = padded_ell(ell_b, 0);
    let lm = padded_ell(ell_b, m - 1);
    let lm1 = padded_ell(ell_b, m);
    let gap = lm - lm1;
    if gap <= 0.0 {
        return Err(Error::DegenerateGap { m, value: lm });
    }
    let hval = h(l1 - 1.0);
    let log_h = if hval > 0.0 { hval.ln().max(0.0) } else { 0.0 };
    let k = 1.1 * l1 / gap * ((1.0 + 1.0 / std::f64::consts::LN_2) * log_n + log_h);
    if !k.is_finite() {
        return Err(Error::DegenerateGap { m, value: lm });
    }
    Ok(k.ceil().max(1.0) as usize)
}

/// `S Q`, touching only the rows of `q` listed in `support`.
///
/// Cost is `O(p · m · card(support))`; rows of `S` are read contiguously.
pub fn multiply_supported(s: &SymMatrix, q: ArrayView2<'_, f64>, support: &[usize]) -> Array2<f64> {
    let p = s.dim();
    let m = q.ncols();
    // Accumulate the transpose so every update is a contiguous axpy.
    let mut tt = Array2::<f64>::zeros((m, p));
    for &mu in support {
        let srow = s.row(mu);
        for j in 0..m {
            let coef = q[[mu, j]];
            if coef != 0.0 {
                tt.row_mut(j).scaled_add(coef, &srow);
            }
        }
    }
    tt.reversed_axes().as_standard_layout().into_owned()
}

/// Fits an `m`-dimensional sparse principal subspace starting from the first
/// `m` columns of `init.q0`.
pub fn itspca(s: &SampleCovWithN, init: &InitResult, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let p = s.p();
    if init.q0.nrows() != p {
        return Err(Error::invalid(format!(
            "initial basis has {} rows but S is {p}x{p}",
            init.q0.nrows()
        )));
    }
    let m = cfg.m;
    let q0 = init.q0.leading(m)?;
    let thresholds = threshold_levels(&init.ell_b, m, s.n, p, cfg.gamma);

    let (limit, cap_is_target) = match cfg.stopping {
        Stopping::Theoretical => {
            let k = kstar(&init.ell_b, m, s.n)?;
            match cfg.max_iters_cap {
                Some(cap) if cap < k => (cap, false),
                _ => (k, true),
            }
        }
        Stopping::MaxIters(k) => (k, true),
        Stopping::Empirical { .. } => {
            let cap = cfg.max_iters_cap.unwrap_or_else(|| {
                let k = kstar(&init.ell_b, m, s.n).unwrap_or(0);
                (2 * k).max(MIN_EMPIRICAL_CAP)
            });
            (cap, false)
        }
    };
    let tol = match cfg.stopping {
        Stopping::Empirical { tol } => Some(tol.unwrap_or_else(|| (s.n as f64).powi(-2))),
        _ => None,
    };

    let mut q = q0.into_inner();
    let mut support = nonzero_rows(q.view());
    let mut iterations = 0;
    let mut converged = false;
    while iterations < limit {
        iterations += 1;
        let mut t = multiply_supported(&s.s, q.view(), &support);
        threshold_in_place(cfg.kind, &mut t, &thresholds);
        let (next, _) = thin_qr(t.view()).map_err(|e| match e {
            Error::RankDeficient { rank, cols, .. } => Error::RankDeficient {
                rank,
                cols,
                iteration: Some(iterations),
            },
            other => other,
        })?;
        let next_support = next.support();
        let done = match tol {
            Some(tol) => {
                let prev = OrthoBasis::from_unchecked(q);
                largest_principal_angle_sin2(&prev, &next)? <= tol
            }
            None => false,
        };
        q = next.into_inner();
        support = next_support;
        if done {
            converged = true;
            break;
        }
    }

    let stop_reason = match cfg.stopping {
        _ if converged => StopReason::EmpiricalConverged,
        Stopping::Theoretical if cap_is_target => StopReason::ReachedKstar,
        Stopping::MaxIters(_) => StopReason::ReachedMaxIters,
        _ => StopReason::CapHit,
    };
    Ok(FitResult {
        basis: OrthoBasis::from_unchecked(q),
        iterations,
        support,
        thresholds,
        ell_b: init.ell_b.clone(),
        stop_reason,
    })
}

/// JSON layout of a [`FitResult`]: the basis is stored sparsely as
/// `(row, col, value)` triples.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitResultJson {
    p: usize,
    m: usize,
    entries: Vec<(usize, usize, f64)>,
    iterations: usize,
    support: Vec<usize>,
    thresholds: Vec<f64>,
    ell_b: Vec<f64>,
    stop_reason: StopReason,
}

impl From<FitResult> for FitResultJson {
    fn from(r: FitResult) -> Self {
        let q = r.basis.view();
        let mut entries = Vec::new();
        for &i in &r.support {
            for j in 0..q.ncols() {
                let v = q[[i, j]];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        FitResultJson {
            p: q.nrows(),
            m: q.ncols(),
            entries,
            iterations: r.iterations,
            support: r.support,
            thresholds: r.thresholds,
            ell_b: r.ell_b,
            stop_reason: r.stop_reason,
        }
    }
}

impl TryFrom<FitResultJson> for FitResult {
    type Error = Error;

    fn try_from(j: FitResultJson) -> Result<Self> {
        let mut q = Array2::zeros((j.p, j.m));
        for (r, c, v) in j.entries {
            if r >= j.p || c >= j.m {
                return Err(Error::invalid(format!("entry ({r}, {c}) outside {}x{}", j.p, j.m)));
            }
            q[[r, c]] = v;
        }
        Ok(FitResult {
            basis: OrthoBasis::new(q)?,
            iterations: j.iterations,
            support: j.support,
            thresholds: j.thresholds,
            ell_b: j.ell_b,
            stop_reason: j.stop_reason,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn threshold_level_examples() {
        assert_eq!(threshold_levels(&[4.0, 1.0], 2, 1024, 2048, 0.0), vec![0.0, 0.0]);
        let g = threshold_levels(&[4.0, 1.0], 2, 1024, 2048, 1.5);
        let expect1 = 1.5 * (4.0 * 2048f64.ln() / 1024.0).sqrt();
        assert!((g[0] - expect1).abs() < 1e-15);
        assert!((g[0] - 0.2589).abs() < 1e-4);
        assert!((g[1] - 0.1294).abs() < 1e-4);
        let flat = threshold_levels(&[1.0, 1.0, 1.0], 3, 100, 50, 2.0);
        assert!(flat.iter().all(|&v| v == flat[0]));
        // implicit padding with 1
        assert_eq!(threshold_levels(&[], 2, 100, 50, 2.0), flat[..2].to_vec());
    }

    #[test]
    fn kstar_examples() {
        // 1.1·101/100 · [(1 + 1/ln 2) ln 1024 + ln h(100)] = 23.916...
        let direct = 1.1 * 101.0 / 100.0
            * ((1.0 + 1.0 / 2f64.ln()) * 1024f64.ln() + (100.0f64 * 100.0 / 101.0).ln());
        assert!((direct - 23.916).abs() < 1e-3);
        assert_eq!(kstar(&[101.0, 1.0], 1, 1024).unwrap(), 24);
        // h(1) = 1/2, so the log term is clamped at 0; 2.2 (1 + 1/ln 2) = 5.374
        assert_eq!(kstar_with_log_n(&[2.0, 1.0], 1, 1.0).unwrap(), 6);
        assert!(matches!(
            kstar(&[3.0, 2.0, 2.0], 2, 100),
            Err(Error::DegenerateGap { m: 2, .. })
        ));
        // padding: ℓ_{m+1} = 1 beyond card(B)
        assert_eq!(kstar(&[101.0], 1, 1024).unwrap(), 24);
    }

    #[test]
    fn stopping_strings() {
        for s in ["theoretical", "empirical", "max_iters:12"] {
            assert_eq!(s.parse::<Stopping>().unwrap().to_string(), s);
        }
        assert_eq!(
            "empirical:1e-6".parse::<Stopping>().unwrap(),
            Stopping::Empirical { tol: Some(1e-6) }
        );
        assert!("sometimes".parse::<Stopping>().is_err());
    }

    #[test]
    fn multiply_matches_dense_product() {
        let s = SymMatrix::new(array![[2.0, 1.0, 0.5], [1.0, 3.0, 0.0], [0.5, 0.0, 1.0]]).unwrap();
        let q = array![[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]];
        let t = multiply_supported(&s, q.view(), &[0, 2]);
        assert_eq!(t, s.view().dot(&q));
    }

    #[test]
    fn rejects_short_initialisation() {
        let s = SampleCovWithN::new(SymMatrix::from_diag(&[5.0, 1.0, 1.0]).unwrap(), 100).unwrap();
        let init = crate::dtspca::dtspca(&s, 1.0, 1.0).unwrap();
        assert_eq!(init.card_b(), 1);
        let err = itspca(&s, &init, &FitConfig::new(2)).unwrap_err();
        assert!(matches!(err, Error::InsufficientInit { available: 1, m: 2 }));
    }

    #[test]
    fn zeroed_column_is_reported_with_iteration() {
        let s = SampleCovWithN::new(
            SymMatrix::new(array![[5.0, 0.0, 0.0], [0.0, 1.2, 0.0], [0.0, 0.0, 1.0]]).unwrap(),
            100,
        )
        .unwrap();
        let init = crate::dtspca::dtspca(&s, 0.1, 1.0).unwrap();
        let mut cfg = FitConfig::new(2);
        cfg.gamma = 20.0;
        match itspca(&s, &init, &cfg) {
            Err(Error::RankDeficient { iteration, .. }) => assert_eq!(iteration, Some(1)),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let s = SampleCovWithN::new(SymMatrix::from_diag(&[5.0, 1.0, 3.0]).unwrap(), 100).unwrap();
        let init = crate::dtspca::dtspca(&s, 1.0, 1.0).unwrap();
        let fit = itspca(&s, &init, &FitConfig::new(2)).unwrap();
        let json = serde_json::to_string(&fit).unwrap();
        let back: FitResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fit);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["p"], 3);
        assert_eq!(v["entries"].as_array().unwrap().len(), 2);
    }
}
