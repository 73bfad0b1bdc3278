//! End-to-end fitting on a data set: noise scaling, screening, rank
//! selection and the iterative fit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dtspca::{dtspca, InitResult};
use crate::error::{Error, Result};
use crate::itspca::{itspca, FitConfig, FitResult, Stopping};
use crate::model::{estimate_noise_var, sample_cov, DataSet, SampleCovWithN};
use crate::rank::{estimate_rank, RankEstimate, DEFAULT_KAPPA_BAR};
use crate::threshold::ThresholdKind;

pub const DEFAULT_ALPHA: f64 = 3.0;
pub const DEFAULT_GAMMA: f64 = 1.5;

/// A fixed subspace dimension or one chosen from the data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "MChoiceRepr", into = "MChoiceRepr")]
pub enum MChoice {
    Fixed(usize),
    Auto,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MChoiceRepr {
    Number(usize),
    Word(String),
}

impl TryFrom<MChoiceRepr> for MChoice {
    type Error = Error;
    fn try_from(r: MChoiceRepr) -> Result<Self> {
        match r {
            MChoiceRepr::Number(m) => Ok(MChoice::Fixed(m)),
            MChoiceRepr::Word(w) => w.parse(),
        }
    }
}

impl From<MChoice> for MChoiceRepr {
    fn from(m: MChoice) -> Self {
        match m {
            MChoice::Fixed(m) => MChoiceRepr::Number(m),
            MChoice::Auto => MChoiceRepr::Word("auto".into()),
        }
    }
}

impl fmt::Display for MChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MChoice::Fixed(m) => write!(f, "{m}"),
            MChoice::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for MChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(MChoice::Auto),
            other => other
                .parse::<usize>()
                .map(MChoice::Fixed)
                .map_err(|_| Error::invalid(format!("m must be a positive integer or \"auto\", got {other:?}"))),
        }
    }
}

/// How the noise level is obtained before screening.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseLevel {
    /// Median of the per-coordinate second moments.
    Estimate,
    Known(f64),
}

impl FromStr for NoiseLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "estimate" => Ok(NoiseLevel::Estimate),
            other => {
                let v: f64 = other
                    .parse()
                    .map_err(|_| Error::invalid(format!("sigma2 must be a number or \"estimate\", got {other:?}")))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::invalid(format!("sigma2 must be positive, got {v}")));
                }
                Ok(NoiseLevel::Known(v))
            }
        }
    }
}

/// Screened second-moment matrix of noise-scaled data.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub s: SampleCovWithN,
    /// Noise variance the data were divided by.
    pub sigma2: f64,
    pub init: InitResult,
}

/// Divides the data by `σ` (estimated or known), forms `S` and runs the
/// diagonal screening with unit noise variance.
pub fn prepare(mut data: DataSet, noise: NoiseLevel, alpha: f64) -> Result<Prepared> {
    let sigma2 = match noise {
        NoiseLevel::Estimate => estimate_noise_var(&data),
        NoiseLevel::Known(v) => v,
    };
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::invalid(format!("noise variance estimate is {sigma2}")));
    }
    data.scale(1.0 / sigma2.sqrt());
    let s = sample_cov(&data)?;
    let init = dtspca(&s, alpha, 1.0)?;
    Ok(Prepared { s, sigma2, init })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub alpha: f64,
    pub kind: ThresholdKind,
    pub gamma: f64,
    pub stopping: Stopping,
    pub kappa_bar: f64,
    pub noise: NoiseLevel,
    pub m: MChoice,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            alpha: DEFAULT_ALPHA,
            kind: ThresholdKind::Soft,
            gamma: DEFAULT_GAMMA,
            stopping: Stopping::default(),
            kappa_bar: DEFAULT_KAPPA_BAR,
            noise: NoiseLevel::Estimate,
            m: MChoice::Auto,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub sigma2: f64,
    pub init: InitResult,
    pub rank: RankEstimate,
    /// Dimension actually fitted; 0 when the data show no spike.
    pub m: usize,
    pub fit: Option<FitResult>,
}

pub fn run_pipeline(data: DataSet, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let (n, p) = (data.n(), data.p());
    let prepared = prepare(data, cfg.noise, cfg.alpha)?;
    let rank = estimate_rank(&prepared.init, n, p, cfg.kappa_bar);
    let m = match cfg.m {
        MChoice::Fixed(m) => m,
        MChoice::Auto => rank.m_selected,
    };
    let fit = if m == 0 {
        None
    } else {
        let fit_cfg = FitConfig {
            m,
            kind: cfg.kind,
            gamma: cfg.gamma,
            stopping: cfg.stopping,
            max_iters_cap: None,
        };
        Some(itspca(&prepared.s, &prepared.init, &fit_cfg)?)
    };
    Ok(PipelineOutput {
        sigma2: prepared.sigma2,
        init: prepared.init,
        rank,
        m,
        fit,
    })
}
