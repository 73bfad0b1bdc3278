//! Scalar thresholding rules `eta(t, gamma)`.
//!
//! Every rule satisfies `|eta(t, γ) − t| ≤ γ` and `eta(t, γ) = 0` whenever
//! `|t| ≤ γ`, with both bounds holding exactly in floating point. Soft and
//! hard thresholding bracket the family; SCAD sits between them.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SCAD_A: f64 = 3.7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ThresholdKind {
    Hard,
    #[default]
    Soft,
    Scad { a: f64 },
}

impl ThresholdKind {
    pub fn scad(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 2.0) {
            return Err(Error::invalid(format!("SCAD parameter must exceed 2, got {a}")));
        }
        Ok(ThresholdKind::Scad { a })
    }

    /// Applies the rule without validating its arguments.
    #[inline]
    pub(crate) fn apply(self, t: f64, gamma: f64) -> f64 {
        let mag = t.abs();
        if mag <= gamma {
            return 0.0;
        }
        match self {
            ThresholdKind::Hard => t,
            ThresholdKind::Soft => soft_magnitude(mag, gamma).copysign(t),
            ThresholdKind::Scad { a } => {
                let soft = soft_magnitude(mag, gamma);
                let out = if mag <= 2.0 * gamma {
                    soft
                } else if mag <= a * gamma {
                    (((a - 1.0) * mag - a * gamma) / (a - 2.0)).clamp(soft, mag)
                } else {
                    mag
                };
                out.copysign(t)
            }
        }
    }
}

// `mag − gamma` for `mag > gamma`, nudged up one ulp when rounding would
// otherwise leave `mag − result` above `gamma`.
#[inline]
fn soft_magnitude(mag: f64, gamma: f64) -> f64 {
    let d = mag - gamma;
    if mag - d > gamma {
        d.next_up()
    } else {
        d
    }
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdKind::Hard => f.write_str("hard"),
            ThresholdKind::Soft => f.write_str("soft"),
            ThresholdKind::Scad { a } => write!(f, "scad:{a}"),
        }
    }
}

impl FromStr for ThresholdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hard" => Ok(ThresholdKind::Hard),
            "soft" => Ok(ThresholdKind::Soft),
            "scad" => ThresholdKind::scad(DEFAULT_SCAD_A),
            other => match other.strip_prefix("scad:") {
                Some(a) => {
                    let a: f64 = a
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad SCAD parameter in {other:?}")))?;
                    ThresholdKind::scad(a)
                }
                None => Err(Error::invalid(format!(
                    "unknown threshold {other:?} (expected hard, soft or scad:<a>)"
                ))),
            },
        }
    }
}

impl TryFrom<String> for ThresholdKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ThresholdKind> for String {
    fn from(k: ThresholdKind) -> String {
        k.to_string()
    }
}

/// `eta(t, gamma)` for the given rule. `gamma = 0` passes `t` through.
pub fn eta(kind: ThresholdKind, t: f64, gamma: f64) -> Result<f64> {
    if !t.is_finite() || !gamma.is_finite() {
        return Err(Error::invalid("threshold arguments must be finite"));
    }
    if gamma < 0.0 {
        return Err(Error::invalid(format!("threshold level must be >= 0, got {gamma}")));
    }
    Ok(kind.apply(t, gamma))
}

/// Thresholds column `j` of `t` at level `gammas[j]`.
pub fn threshold_matrix(
    kind: ThresholdKind,
    t: ArrayView2<'_, f64>,
    gammas: &[f64],
) -> Result<Array2<f64>> {
    if gammas.len() != t.ncols() {
        return Err(Error::invalid(format!(
            "{} threshold levels for {} columns",
            gammas.len(),
            t.ncols()
        )));
    }
    if gammas.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::invalid("threshold levels must be finite and >= 0"));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let mut out = t.to_owned();
    threshold_in_place(kind, &mut out, gammas);
    Ok(out)
}

pub(crate) fn threshold_in_place(kind: ThresholdKind, t: &mut Array2<f64>, gammas: &[f64]) {
    for (mut col, &g) in t.axis_iter_mut(Axis(1)).zip(gammas) {
        col.mapv_inplace(|v| kind.apply(v, g));
    }
}
