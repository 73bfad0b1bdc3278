//! Monte Carlo harness for the single- and multi-spike simulations.
//!
//! Replicate `r` of an experiment draws its data with seed
//! `base_seed + r`, so replicates are independent of scheduling and the
//! report is a pure function of the spec.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{oracle_quantities, OracleQuantities};
use crate::error::{Error, Result};
use crate::itspca::{itspca, FitConfig, Stopping};
use crate::linalg::{thin_qr, OrthoBasis};
use crate::metrics::{subspace_loss, LossRecord};
use crate::model::{generate, SpikedModel};
use crate::pipeline::{prepare, MChoice, NoiseLevel, Prepared, DEFAULT_ALPHA, DEFAULT_GAMMA};
use crate::rank::{estimate_rank, RankEstimate, DEFAULT_KAPPA_BAR};
use crate::threshold::ThresholdKind;
use crate::wavelet::{dwt, test_signal, SignalName, WaveletSpec};

/// Largest tolerated fraction of failed replicates in any cell.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    Itspca {
        #[serde(default)]
        threshold: ThresholdKind,
        /// Overrides the experiment-level `gamma`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default)]
        stop: Stopping,
    },
    Dtspca,
}

impl Method {
    pub fn itspca() -> Self {
        Method::Itspca {
            threshold: ThresholdKind::Soft,
            gamma: None,
            stop: Stopping::default(),
        }
    }

    pub fn itspca_hard() -> Self {
        Method::Itspca {
            threshold: ThresholdKind::Hard,
            gamma: None,
            stop: Stopping::default(),
        }
    }

    pub fn itspca_with_gamma(gamma: f64) -> Self {
        Method::Itspca {
            threshold: ThresholdKind::Soft,
            gamma: Some(gamma),
            stop: Stopping::default(),
        }
    }

    fn label(&self, default_gamma: f64) -> String {
        match self {
            Method::Itspca {
                threshold,
                gamma,
                stop,
            } => format!("itspca({threshold},gamma={},{stop})", gamma.unwrap_or(default_gamma)),
            Method::Dtspca => "dtspca".to_string(),
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::itspca()]
}
fn default_true() -> bool {
    true
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_kappa_bar() -> f64 {
    DEFAULT_KAPPA_BAR
}

/// Target dimensions to fit: a list, or `"auto"` alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MValuesRepr", into = "MValuesRepr")]
pub struct MValues(pub Vec<MChoice>);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MValuesRepr {
    List(Vec<MChoice>),
    One(MChoice),
}

impl TryFrom<MValuesRepr> for MValues {
    type Error = Error;
    fn try_from(r: MValuesRepr) -> Result<Self> {
        Ok(match r {
            MValuesRepr::List(v) => MValues(v),
            MValuesRepr::One(m) => MValues(vec![m]),
        })
    }
}

impl From<MValues> for MValuesRepr {
    fn from(m: MValues) -> Self {
        MValuesRepr::List(m.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Row label in reports; defaults to the source names joined by `+`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub p: usize,
    pub n: usize,
    /// Spike sizes `λ_j²`, nonincreasing.
    pub spikes: Vec<f64>,
    /// Test curves used as loadings, orthonormalised in order.
    pub eigvec_sources: Vec<SignalName>,
    pub replicates: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_true")]
    pub wavelet: bool,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_kappa_bar")]
    pub kappa_bar: f64,
    #[serde(default)]
    pub base_seed: u64,
    pub m_values: MValues,
}

impl ExperimentSpec {
    /// One spike on a single test curve, `p = 2048`, `n = 1024`, comparing
    /// soft- and hard-thresholded ITSPCA with DTSPCA.
    pub fn single_spike(source: SignalName, spike: f64, replicates: usize) -> Self {
        ExperimentSpec {
            label: None,
            p: 2048,
            n: 1024,
            spikes: vec![spike],
            eigvec_sources: vec![source],
            replicates,
            methods: vec![Method::itspca(), Method::itspca_hard(), Method::Dtspca],
            wavelet: true,
            alpha: DEFAULT_ALPHA,
            gamma: DEFAULT_GAMMA,
            kappa_bar: DEFAULT_KAPPA_BAR,
            base_seed: 0,
            m_values: MValues(vec![MChoice::Fixed(1)]),
        }
    }

    /// Four spikes on step, poly, peak and sing, fitted at `m = 1..4`.
    pub fn multi_spike(spikes: [f64; 4], replicates: usize) -> Self {
        ExperimentSpec {
            label: None,
            p: 2048,
            n: 1024,
            spikes: spikes.to_vec(),
            eigvec_sources: SignalName::ALL.to_vec(),
            replicates,
            methods: vec![Method::itspca(), Method::itspca_hard(), Method::Dtspca],
            wavelet: true,
            alpha: DEFAULT_ALPHA,
            gamma: DEFAULT_GAMMA,
            kappa_bar: DEFAULT_KAPPA_BAR,
            base_seed: 0,
            m_values: MValues((1..=4).map(MChoice::Fixed).collect()),
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            self.eigvec_sources
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join("+")
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.p < 8 || !self.p.is_power_of_two() {
            return bad(format!("p must be a power of two >= 8, got {}", self.p));
        }
        if self.spikes.is_empty() || self.spikes.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("spikes must be nonempty and positive".into());
        }
        if self.spikes.windows(2).any(|w| w[1] > w[0]) {
            return bad("spikes must be nonincreasing".into());
        }
        if self.eigvec_sources.len() != self.spikes.len() {
            return bad(format!(
                "{} spikes but {} eigenvector sources",
                self.spikes.len(),
                self.eigvec_sources.len()
            ));
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.m_values.0.is_empty() {
            return bad("m_values must not be empty".into());
        }
        for m in &self.m_values.0 {
            if let MChoice::Fixed(m) = m {
                if *m == 0 || *m > self.p {
                    return bad(format!("m = {m} out of range"));
                }
            }
        }
        for (name, v) in [("alpha", self.alpha), ("kappa_bar", self.kappa_bar)] {
            if v.is_nan() || v <= 0.0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad("gamma must be >= 0".into());
        }
        for method in &self.methods {
            if let Method::Itspca { gamma: Some(g), .. } = method {
                if !(g.is_finite() && *g >= 0.0) {
                    return bad("method gamma must be >= 0".into());
                }
            }
        }
        Ok(())
    }

    fn wavelet_spec(&self) -> Option<WaveletSpec> {
        self.wavelet.then(|| WaveletSpec::default_for(self.p))
    }

    /// The generating model: the source curves orthonormalised in order,
    /// in the original (pre-transform) domain.
    pub fn model(&self) -> Result<SpikedModel> {
        let k = self.eigvec_sources.len();
        let mut raw = Array2::zeros((self.p, k));
        for (j, &name) in self.eigvec_sources.iter().enumerate() {
            let sig = test_signal(name, self.p)?;
            raw.column_mut(j).assign(&ndarray::Array1::from(sig.values));
        }
        let (q, _) = thin_qr(raw.view()).map_err(|_| {
            Error::invalid("eigenvector sources are linearly dependent")
        })?;
        SpikedModel::new(self.spikes.clone(), q, 1.0)
    }

    /// Loadings in the domain the estimators see (after the wavelet
    /// transform when enabled).
    pub fn analysis_model(&self) -> Result<SpikedModel> {
        let model = self.model()?;
        match self.wavelet_spec() {
            None => Ok(model),
            Some(spec) => {
                let q = model.eigvecs().view();
                let mut w = Array2::zeros(q.dim());
                for j in 0..q.ncols() {
                    let c = dwt(&q.column(j).to_vec(), spec)?;
                    w.column_mut(j).assign(&ndarray::Array1::from(c));
                }
                SpikedModel::new(self.spikes.clone(), OrthoBasis::new(w)?, 1.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub label: String,
    pub lambda2: Vec<f64>,
    pub method: String,
    pub m: MChoice,
    pub mean_loss: f64,
    pub se_loss: f64,
    pub mean_size: f64,
    pub mean_iters: f64,
    pub n_fail: usize,
    pub records: Vec<LossRecord>,
    pub failures: Vec<ReplicateFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub cells: Vec<CellSummary>,
    /// How often each estimated spike count occurred.
    pub nspike_hat_freq: BTreeMap<usize, usize>,
    /// How often each data-selected dimension occurred.
    pub m_selected_freq: BTreeMap<usize, usize>,
    pub oracle: Option<OracleQuantities>,
}

impl ExperimentReport {
    pub fn cell(&self, method_prefix: &str, m: MChoice) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.method.starts_with(method_prefix) && c.m == m)
    }
}

struct Replicate {
    seed: u64,
    rank: Option<RankEstimate>,
    outcomes: Vec<std::result::Result<LossRecord, String>>,
}

fn run_replicate(
    spec: &ExperimentSpec,
    model: &SpikedModel,
    truth: &OrthoBasis,
    cells: &[(Method, MChoice)],
    seed: u64,
) -> Replicate {
    let prepared = (|| -> Result<Prepared> {
        let mut data = generate(model, spec.n, seed)?;
        if let Some(ws) = spec.wavelet_spec() {
            data.transform_rows(|row| dwt(row, ws))?;
        }
        prepare(data, NoiseLevel::Estimate, spec.alpha)
    })();
    let prepared = match prepared {
        Ok(p) => p,
        Err(e) => {
            return Replicate {
                seed,
                rank: None,
                outcomes: vec![Err(e.to_string()); cells.len()],
            }
        }
    };
    let rank = estimate_rank(&prepared.init, spec.n, spec.p, spec.kappa_bar);
    let outcomes = cells
        .iter()
        .map(|(method, m)| fit_cell(spec, &prepared, &rank, truth, method, *m, seed).map_err(|e| e.to_string()))
        .collect();
    Replicate {
        seed,
        rank: Some(rank),
        outcomes,
    }
}

fn fit_cell(
    spec: &ExperimentSpec,
    prepared: &Prepared,
    rank: &RankEstimate,
    truth: &OrthoBasis,
    method: &Method,
    m: MChoice,
    seed: u64,
) -> Result<LossRecord> {
    let m = match m {
        MChoice::Fixed(m) => m,
        MChoice::Auto if rank.m_selected == 0 => {
            return Err(Error::invalid("no signal: selected subspace dimension is 0"))
        }
        MChoice::Auto => rank.m_selected,
    };
    let (basis, support_size, iterations) = match method {
        Method::Dtspca => {
            let b = prepared.init.q0.leading(m)?;
            (b, prepared.init.card_b(), 0)
        }
        Method::Itspca {
            threshold,
            gamma,
            stop,
        } => {
            let cfg = FitConfig {
                m,
                kind: *threshold,
                gamma: gamma.unwrap_or(spec.gamma),
                stopping: *stop,
                max_iters_cap: None,
            };
            let fit = itspca(&prepared.s, &prepared.init, &cfg)?;
            let size = fit.support.len();
            (fit.basis, size, fit.iterations)
        }
    };
    let target = if m <= truth.ncols() {
        truth.leading(m)?
    } else {
        truth.clone()
    };
    Ok(LossRecord {
        loss: subspace_loss(&target, &basis)?,
        support_size,
        iterations,
        seed,
    })
}

fn mean(v: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut sum = 0.0;
    let mut k = 0;
    for x in v {
        sum += x;
        k += 1;
    }
    (if k == 0 { f64::NAN } else { sum / k as f64 }, k)
}

fn summarize(spec: &ExperimentSpec, method: &Method, m: MChoice, mut results: Vec<(u64, std::result::Result<LossRecord, String>)>) -> CellSummary {
    results.sort_by_key(|(seed, _)| *seed);
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(error) => failures.push(ReplicateFailure { seed, error }),
        }
    }
    let (mean_loss, k) = mean(records.iter().map(|r| r.loss));
    let se_loss = if k > 1 {
        let var = records.iter().map(|r| (r.loss - mean_loss).powi(2)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    } else {
        0.0
    };
    CellSummary {
        label: spec.label(),
        lambda2: spec.spikes.clone(),
        method: method.label(spec.gamma),
        m,
        mean_loss,
        se_loss,
        mean_size: mean(records.iter().map(|r| r.support_size as f64)).0,
        mean_iters: mean(records.iter().map(|r| r.iterations as f64)).0,
        n_fail: failures.len(),
        records,
        failures,
    }
}

/// Runs every replicate of `spec` on the current rayon pool and aggregates.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let model = spec.model()?;
    let analysis = spec.analysis_model()?;
    let truth = analysis.eigvecs().clone();
    let cells: Vec<(Method, MChoice)> = spec
        .methods
        .iter()
        .flat_map(|method| spec.m_values.0.iter().map(move |m| (method.clone(), *m)))
        .collect();

    let replicates: Vec<Replicate> = (0..spec.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(spec, &model, &truth, &cells, spec.base_seed.wrapping_add(r)))
        .collect();

    let mut nspike_hat_freq = BTreeMap::new();
    let mut m_selected_freq = BTreeMap::new();
    for rep in &replicates {
        if let Some(rank) = &rep.rank {
            *nspike_hat_freq.entry(rank.nspike_hat).or_insert(0) += 1;
            *m_selected_freq.entry(rank.m_selected).or_insert(0) += 1;
        }
    }

    let mut summaries = Vec::with_capacity(cells.len());
    for (c, (method, m)) in cells.iter().enumerate() {
        let results = replicates
            .iter()
            .map(|rep| (rep.seed, rep.outcomes[c].clone()))
            .collect();
        let summary = summarize(spec, method, *m, results);
        if summary.n_fail as f64 > MAX_FAILURE_FRACTION * spec.replicates as f64 {
            return Err(Error::TooManyFailures {
                cell: format!("{} {} m={}", summary.label, summary.method, summary.m),
                failed: summary.n_fail,
                total: spec.replicates,
            });
        }
        summaries.push(summary);
    }

    let oracle = oracle_quantities(&analysis, spec.n, spec.gamma, analysis.n_spikes(), 1.0).ok();
    Ok(ExperimentReport {
        spec: spec.clone(),
        cells: summaries,
        nspike_hat_freq,
        m_selected_freq,
        oracle,
    })
}

pub fn run_suite(specs: &[ExperimentSpec]) -> Result<Vec<ExperimentReport>> {
    specs.iter().map(run_experiment).collect()
}

/// Spike sizes of the single-spike table.
pub const TABLE1_SPIKES: [f64; 5] = [100.0, 25.0, 10.0, 5.0, 2.0];

/// Spike configurations of the multi-spike table.
pub const TABLE2_SPIKES: [[f64; 4]; 4] = [
    [100.0, 75.0, 50.0, 25.0],
    [60.0, 55.0, 50.0, 45.0],
    [30.0, 27.0, 25.0, 22.0],
    [30.0, 20.0, 10.0, 5.0],
];

pub fn table1_specs(replicates: usize, base_seed: u64) -> Vec<ExperimentSpec> {
    SignalName::ALL
        .iter()
        .flat_map(|&name| {
            TABLE1_SPIKES.iter().map(move |&spike| ExperimentSpec {
                base_seed,
                ..ExperimentSpec::single_spike(name, spike, replicates)
            })
        })
        .collect()
}

pub fn table2_specs(replicates: usize, base_seed: u64) -> Vec<ExperimentSpec> {
    TABLE2_SPIKES
        .iter()
        .map(|&spikes| ExperimentSpec {
            base_seed,
            ..ExperimentSpec::multi_spike(spikes, replicates)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "label", "lambda2", "method", "m", "mean_loss", "se_loss", "mean_size", "mean_iters", "n_fail",
];

pub fn render_csv(reports: &[ExperimentReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::invalid(format!("csv encoding failed: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for cell in reports.iter().flat_map(|r| &r.cells) {
        let lambda2 = cell
            .lambda2
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            cell.label.clone(),
            lambda2,
            cell.method.clone(),
            cell.m.to_string(),
            format!("{:.6}", cell.mean_loss),
            format!("{:.6}", cell.se_loss),
            format!("{:.2}", cell.mean_size),
            format!("{:.2}", cell.mean_iters),
            cell.n_fail.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_json(reports: &[ExperimentReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::invalid(format!("json encoding failed: {e}")))
}

pub fn emit_report(reports: &[ExperimentReport], format: ReportFormat, path: &Path) -> Result<()> {
    let body = match format {
        ReportFormat::Csv => render_csv(reports)?,
        ReportFormat::Json => render_json(reports)?,
    };
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Parses a spec file holding one spec object or an array of them.
pub fn parse_specs(json: &str) -> Result<Vec<ExperimentSpec>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<ExperimentSpec>),
        One(Box<ExperimentSpec>),
    }
    // Untagged enums swallow the field-level message, so retry each form to
    // report the real problem.
    match serde_json::from_str::<OneOrMany>(json) {
        Ok(OneOrMany::Many(v)) => Ok(v),
        Ok(OneOrMany::One(s)) => Ok(vec![*s]),
        Err(_) => {
            let trimmed = json.trim_start();
            let err = if trimmed.starts_with('[') {
                serde_json::from_str::<Vec<ExperimentSpec>>(json).err()
            } else {
                serde_json::from_str::<ExperimentSpec>(json).err()
            };
            Err(Error::invalid(format!(
                "bad experiment spec: {}",
                err.map(|e| e.to_string()).unwrap_or_else(|| "unrecognised layout".into())
            )))
        }
    }
}
