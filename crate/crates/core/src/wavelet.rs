//! Periodised orthonormal discrete wavelet transform with the 16-tap
//! Symmlet 8 filter, and the four test curves used by the simulations.
//!
//! Coefficients are laid out coarse to fine:
//! `[a_L | d_L | d_{L-1} | ... | d_1]`, where level `j` holds `p / 2^j`
//! detail coefficients.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmlet 8 scaling (low-pass analysis) filter, as tabulated in
/// Daubechies, *Ten Lectures on Wavelets* (1992) and distributed with
/// PyWavelets as `sym8`.
pub const SYMMLET8: [f64; 16] = [
    -0.0033824159510061256,
    -0.0005421323317911481,
    0.03169508781149298,
    0.007607487324917605,
    -0.1432942383508097,
    -0.061273359067658524,
    0.4813596512583722,
    0.7771857517005235,
    0.3644418948353314,
    -0.05194583810770904,
    -0.027219029917056003,
    0.049137179673607506,
    0.003808752013890615,
    -0.01495225833704823,
    -0.0003029205147213668,
    0.0018899503327594609,
];

fn highpass() -> [f64; 16] {
    let mut g = [0.0; 16];
    for (i, gi) in g.iter_mut().enumerate() {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        *gi = sign * SYMMLET8[15 - i];
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveletSpec {
    pub levels: usize,
}

impl WaveletSpec {
    pub fn new(levels: usize) -> Self {
        WaveletSpec { levels }
    }

    /// `log2(p) − 4` levels, leaving 16 coarse coefficients.
    pub fn default_for(p: usize) -> Self {
        let log2 = p.max(1).ilog2() as usize;
        WaveletSpec {
            levels: log2.saturating_sub(4).max(1),
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        if self.levels == 0 || self.levels >= usize::BITS as usize {
            return Err(Error::invalid(format!("bad number of levels {}", self.levels)));
        }
        let block = 1usize << self.levels;
        if len == 0 || !len.is_multiple_of(block) {
            return Err(Error::invalid(format!(
                "signal length {len} is not a positive multiple of 2^{}",
                self.levels
            )));
        }
        Ok(())
    }
}

/// Forward transform.
pub fn dwt(signal: &[f64], spec: WaveletSpec) -> Result<Vec<f64>> {
    spec.check(signal.len())?;
    let g = highpass();
    let mut out = signal.to_vec();
    let mut work = vec![0.0; signal.len()];
    let mut len = signal.len();
    for _ in 0..spec.levels {
        let half = len / 2;
        for k in 0..half {
            let mut a = 0.0;
            let mut d = 0.0;
            for i in 0..16 {
                let x = out[(2 * k + i) % len];
                a += SYMMLET8[i] * x;
                d += g[i] * x;
            }
            work[k] = a;
            work[half + k] = d;
        }
        out[..len].copy_from_slice(&work[..len]);
        len = half;
    }
    Ok(out)
}

/// Inverse transform.
pub fn idwt(coeffs: &[f64], spec: WaveletSpec) -> Result<Vec<f64>> {
    spec.check(coeffs.len())?;
    let g = highpass();
    let mut out = coeffs.to_vec();
    let mut work = vec![0.0; coeffs.len()];
    let mut len = coeffs.len() >> spec.levels;
    for _ in 0..spec.levels {
        let full = 2 * len;
        work[..full].fill(0.0);
        for k in 0..len {
            let a = out[k];
            let d = out[len + k];
            for i in 0..16 {
                work[(2 * k + i) % full] += SYMMLET8[i] * a + g[i] * d;
            }
        }
        out[..full].copy_from_slice(&work[..full]);
        len = full;
    }
    Ok(out)
}

/// Resolution level of each coefficient in the output of [`dwt`]: 0 for the
/// coarse scaling block, otherwise the detail level `j` (1 = finest).
pub fn coefficient_levels(p: usize, spec: WaveletSpec) -> Result<Vec<usize>> {
    spec.check(p)?;
    let mut levels = vec![0; p];
    let mut len = p;
    for j in 1..=spec.levels {
        let half = len / 2;
        levels[half..len].fill(j);
        len = half;
    }
    Ok(levels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalName {
    Step,
    Poly,
    Peak,
    Sing,
}

impl SignalName {
    pub const ALL: [SignalName; 4] = [
        SignalName::Step,
        SignalName::Poly,
        SignalName::Peak,
        SignalName::Sing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SignalName::Step => "step",
            SignalName::Poly => "poly",
            SignalName::Peak => "peak",
            SignalName::Sing => "sing",
        }
    }
}

impl fmt::Display for SignalName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignalName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "step" => Ok(SignalName::Step),
            "poly" => Ok(SignalName::Poly),
            "peak" => Ok(SignalName::Peak),
            "sing" => Ok(SignalName::Sing),
            other => Err(Error::invalid(format!(
                "unknown test signal {other:?} (expected step, poly, peak or sing)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSignal {
    pub name: SignalName,
    pub values: Vec<f64>,
}

impl TestSignal {
    pub fn p(&self) -> usize {
        self.values.len()
    }
}

/// Samples the named curve at `ν/p`, `ν = 1..p`, normalised to unit norm.
pub fn test_signal(name: SignalName, p: usize) -> Result<TestSignal> {
    if p < 8 || !p.is_power_of_two() {
        return Err(Error::invalid(format!("signal length must be a power of two >= 8, got {p}")));
    }
    let f: fn(f64, usize) -> f64 = match name {
        SignalName::Step => step,
        SignalName::Poly => poly,
        SignalName::Peak => peak,
        SignalName::Sing => sing,
    };
    let mut values: Vec<f64> = (1..=p).map(|i| f(i as f64 / p as f64, p)).collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut values {
        *v /= norm;
    }
    Ok(TestSignal { name, values })
}

pub fn test_signal_by_name(name: &str, p: usize) -> Result<TestSignal> {
    test_signal(name.parse()?, p)
}

// Piecewise constant on the ten intervals [k/10, (k+1)/10), alternating
// between 3/2 and -1/2.
fn step(t: f64, _p: usize) -> f64 {
    if (10.0 * t).floor() as i64 % 2 == 0 {
        1.5
    } else {
        -0.5
    }
}

// Piecewise polynomial of degree at most 3 with jumps.
fn poly(t: f64, _p: usize) -> f64 {
    if t <= 0.1 {
        20.0 * (t.powi(3) + t.powi(2) + 4.0)
    } else if t <= 0.25 {
        10.0 * t.powi(3) + 45.0
    } else if t <= 0.45 {
        40.0 * (2.0 * t.powi(3) + t) + 100.0
    } else if t <= 0.6 {
        16.0 * t.powi(2) + 8.0 * t + 16.0
    } else if t <= 0.8 {
        20.0 * (t + 4.0)
    } else {
        20.0
    }
}

fn beta_density(t: f64, a: f64, b: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let log_norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    (log_norm + (a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln()).exp()
}

// Three narrow beta-density bumps.
fn peak(t: f64, _p: usize) -> f64 {
    0.7 * beta_density(t, 1500.0, 3000.0)
        + 0.5 * beta_density(t, 1200.0, 900.0)
        + 0.5 * beta_density(t, 600.0, 160.0)
}

// `1 / |t − t0|` with `t0` placed halfway between two grid points.
fn sing(t: f64, p: usize) -> f64 {
    let k = (0.37 * p as f64).floor();
    let t0 = (k + 0.5) / p as f64;
    1.0 / (t - t0).abs()
}

/// Log-gamma for positive arguments (Lanczos, g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn filter_is_orthonormal() {
        let h = SYMMLET8;
        let sum: f64 = h.iter().sum();
        assert!((sum - 2f64.sqrt()).abs() < 1e-12);
        for shift in 0..8 {
            let dot: f64 = (0..16 - 2 * shift).map(|i| h[i] * h[i + 2 * shift]).sum();
            let target = if shift == 0 { 1.0 } else { 0.0 };
            assert!((dot - target).abs() < 1e-12, "shift {shift}: {dot}");
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let spec = WaveletSpec::new(3);
        assert_eq!(dwt(&[0.0; 64], spec).unwrap(), vec![0.0; 64]);
        assert_eq!(idwt(&[0.0; 64], spec).unwrap(), vec![0.0; 64]);
    }

    #[test]
    fn round_trip_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..2048).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec = WaveletSpec::new(5);
        let c = dwt(&x, spec).unwrap();
        assert!((norm(&c) - norm(&x)).abs() < 1e-10);
        let back = idwt(&c, spec).unwrap();
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn unit_coefficient_gives_unit_atom() {
        let spec = WaveletSpec::new(4);
        for k in [0, 5, 20, 63] {
            let mut c = vec![0.0; 64];
            c[k] = 1.0;
            assert!((norm(&idwt(&c, spec).unwrap()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_lengths() {
        assert!(dwt(&[0.0; 24], WaveletSpec::new(4)).is_err());
        assert!(idwt(&[], WaveletSpec::new(1)).is_err());
        assert!(dwt(&[0.0; 16], WaveletSpec::new(0)).is_err());
    }

    #[test]
    fn default_depth() {
        assert_eq!(WaveletSpec::default_for(2048).levels, 7);
        assert_eq!(WaveletSpec::default_for(64).levels, 2);
        assert_eq!(coefficient_levels(8, WaveletSpec::new(2)).unwrap(), vec![0, 0, 2, 2, 1, 1, 1, 1]);
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        assert!((ln_gamma(1.0)).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        let mut lf = 0.0;
        for k in 1..200 {
            lf += (k as f64).ln();
        }
        assert!((ln_gamma(200.0) - lf).abs() < 1e-9 * lf);
    }

    #[test]
    fn signals_are_unit_and_deterministic() {
        for name in SignalName::ALL {
            let a = test_signal(name, 256).unwrap();
            assert!((norm(&a.values) - 1.0).abs() < 1e-12);
            assert_eq!(a, test_signal(name, 256).unwrap());
            assert!(a.values.iter().all(|v| v.is_finite()));
        }
        let s = test_signal(SignalName::Step, 8).unwrap();
        assert!((norm(&s.values) - 1.0).abs() < 1e-12);
        assert!(test_signal_by_name("ramp", 64).is_err());
        assert!(test_signal(SignalName::Peak, 100).is_err());
    }
}
