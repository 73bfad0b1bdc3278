//! Spiked covariance model, Gaussian data generation and second-moment
//! estimates.
//!
//! Observations follow `x = Σ_j λ_j v_j q_j + σ z` with independent standard
//! normal factors `v_j` and noise `z`, so `Cov(x) = Σ_j λ_j² q_j q_jᵀ + σ² I`.
//! The mean is taken to be zero throughout and second moments are uncentered.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{OrthoBasis, SymMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikedModel {
    /// Spike sizes `λ_j²`, nonincreasing and strictly positive.
    spikes: Vec<f64>,
    /// `p x n̄` orthonormal loadings `q_j`.
    eigvecs: OrthoBasis,
    noise_var: f64,
}

impl SpikedModel {
    pub fn new(spikes: Vec<f64>, eigvecs: OrthoBasis, noise_var: f64) -> Result<Self> {
        if spikes.is_empty() {
            return Err(Error::invalid("model needs at least one spike"));
        }
        if spikes.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("spikes must be finite and positive"));
        }
        if spikes.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("spikes must be nonincreasing"));
        }
        if eigvecs.ncols() != spikes.len() {
            return Err(Error::invalid(format!(
                "{} spikes but {} eigenvectors",
                spikes.len(),
                eigvecs.ncols()
            )));
        }
        if !(noise_var.is_finite() && noise_var > 0.0) {
            return Err(Error::invalid("noise variance must be positive"));
        }
        Ok(SpikedModel {
            spikes,
            eigvecs,
            noise_var,
        })
    }

    pub fn p(&self) -> usize {
        self.eigvecs.nrows()
    }

    pub fn n_spikes(&self) -> usize {
        self.spikes.len()
    }

    pub fn spikes(&self) -> &[f64] {
        &self.spikes
    }

    pub fn eigvecs(&self) -> &OrthoBasis {
        &self.eigvecs
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// The population covariance `Σ_j λ_j² q_j q_jᵀ + σ² I` (dense, `p x p`).
    pub fn covariance(&self) -> SymMatrix {
        let q = self.eigvecs.view();
        let scaled = &q * &Array1::from(self.spikes.clone());
        let mut sigma = scaled.dot(&q.t());
        for i in 0..self.p() {
            sigma[[i, i]] += self.noise_var;
        }
        SymMatrix::new(sigma).expect("covariance of a valid model is finite")
    }
}

/// `n` observations of dimension `p`, one per row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    rows: Array2<f64>,
    /// Seed the data was generated from; 0 for data loaded from disk.
    pub rng_seed: u64,
}

impl DataSet {
    pub fn new(rows: Array2<f64>, rng_seed: u64) -> Result<Self> {
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("data has non-finite entries"));
        }
        Ok(DataSet { rows, rng_seed })
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn p(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn into_rows(self) -> Array2<f64> {
        self.rows
    }

    /// Multiplies every entry by `factor`.
    pub fn scale(&mut self, factor: f64) {
        self.rows.mapv_inplace(|v| v * factor);
    }

    /// Applies `f` to every observation in place.
    pub fn transform_rows<F>(&mut self, mut f: F) -> Result<()>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        for mut row in self.rows.axis_iter_mut(Axis(0)) {
            let input = row.to_vec();
            let out = f(&input)?;
            if out.len() != input.len() {
                return Err(Error::invalid("row transform changed the dimension"));
            }
            row.assign(&Array1::from(out));
        }
        Ok(())
    }
}

/// Sample second-moment matrix `S = (1/n) Σ x_i x_iᵀ` together with `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleCovWithN {
    pub s: SymMatrix,
    pub n: usize,
}

impl SampleCovWithN {
    pub fn new(s: SymMatrix, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        Ok(SampleCovWithN { s, n })
    }

    pub fn p(&self) -> usize {
        self.s.dim()
    }
}

/// Draws `n` observations from `model`.
///
/// Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` with standard
/// normals from `rand_distr::StandardNormal` (ziggurat). For each row the
/// `n̄` factors are drawn first, then the `p` noise coordinates.
pub fn generate(model: &SpikedModel, n: usize, seed: u64) -> Result<DataSet> {
    if n < 2 {
        return Err(Error::invalid(format!("sample size must be at least 2, got {n}")));
    }
    let p = model.p();
    let k = model.n_spikes();
    let lambdas: Vec<f64> = model.spikes.iter().map(|s| s.sqrt()).collect();
    let sigma = model.noise_var.sqrt();
    let q = model.eigvecs.view();
    // Row-major copy of the loadings so each factor contributes a contiguous axpy.
    let qt: Array2<f64> = q.t().to_owned();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Array2::zeros((n, p));
    let mut factors = vec![0.0; k];
    for mut row in rows.axis_iter_mut(Axis(0)) {
        for (f, l) in factors.iter_mut().zip(&lambdas) {
            let v: f64 = StandardNormal.sample(&mut rng);
            *f = l * v;
        }
        for x in row.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x = sigma * z;
        }
        for (j, &f) in factors.iter().enumerate() {
            row.scaled_add(f, &qt.row(j));
        }
    }
    DataSet::new(rows, seed)
}

/// `S = (1/n) XᵀX` without centering.
pub fn sample_cov(data: &DataSet) -> Result<SampleCovWithN> {
    let n = data.n();
    if n == 0 {
        return Err(Error::invalid("data set is empty"));
    }
    let x = &data.rows;
    let mut s = x.t().dot(x);
    s.mapv_inplace(|v| v / n as f64);
    SampleCovWithN::new(SymMatrix::new(s)?, n)
}

/// Median over coordinates of the uncentered second moments `(1/n) Σ_i x_iν²`.
/// Even `p` takes the mean of the two central values.
pub fn estimate_noise_var(data: &DataSet) -> f64 {
    let n = data.n().max(1) as f64;
    let moments: Vec<f64> = data
        .rows
        .axis_iter(Axis(1))
        .map(|col| col.iter().map(|v| v * v).sum::<f64>() / n)
        .collect();
    median(moments)
}

pub(crate) fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn e1_model(p: usize, spike: f64) -> SpikedModel {
        SpikedModel::new(vec![spike], OrthoBasis::coordinate(p, &[0]).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn model_invariants() {
        let q = OrthoBasis::coordinate(3, &[0, 1]).unwrap();
        assert!(SpikedModel::new(vec![1.0, 2.0], q.clone(), 1.0).is_err());
        assert!(SpikedModel::new(vec![2.0, 0.0], q.clone(), 1.0).is_err());
        assert!(SpikedModel::new(vec![2.0], q.clone(), 1.0).is_err());
        assert!(SpikedModel::new(vec![2.0, 1.0], q, 0.0).is_err());
    }

    #[test]
    fn generate_is_deterministic() {
        let m = e1_model(5, 4.0);
        let a = generate(&m, 20, 99).unwrap();
        let b = generate(&m, 20, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(&m, 20, 100).unwrap());
        assert!(generate(&m, 1, 0).is_err());
    }

    #[test]
    fn generate_matches_variances() {
        let m = e1_model(2, 4.0);
        let data = generate(&m, 100_000, 5).unwrap();
        let s = sample_cov(&data).unwrap().s;
        assert!((s.view()[[0, 0]] - 5.0).abs() < 0.25, "{}", s.view()[[0, 0]]);
        assert!((s.view()[[1, 1]] - 1.0).abs() < 0.05);
        assert!(s.view()[[0, 1]].abs() < 0.05);
    }

    #[test]
    fn sample_cov_small_cases() {
        let one = DataSet::new(array![[1.0, 0.0]], 0).unwrap();
        assert_eq!(sample_cov(&one).unwrap().s.view(), array![[1.0, 0.0], [0.0, 0.0]]);
        let two = DataSet::new(array![[1.0, 0.0], [-1.0, 0.0]], 0).unwrap();
        assert_eq!(sample_cov(&two).unwrap().s.view(), array![[1.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn sample_cov_matches_outer_product_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-2.0..2.0));
        let data = DataSet::new(x.clone(), 0).unwrap();
        let s = sample_cov(&data).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let brute: f64 = (0..5).map(|i| x[[i, a]] * x[[i, b]]).sum::<f64>() / 5.0;
                assert!((s.s.view()[[a, b]] - brute).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn noise_var_examples() {
        let zeros = DataSet::new(Array2::zeros((4, 3)), 0).unwrap();
        assert_eq!(estimate_noise_var(&zeros), 0.0);
        // second moments 1, 5, 2
        let x = array![[1.0, 5f64.sqrt(), 2f64.sqrt()]];
        let data = DataSet::new(x, 0).unwrap();
        assert!((estimate_noise_var(&data) - 2.0).abs() < 1e-12);
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
