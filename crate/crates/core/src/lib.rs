//! Sparse principal subspace estimation for spiked covariance models.
//!
//! The estimator is orthogonal iteration with an elementwise thresholding
//! step between the multiplication and the QR factorisation
//! ([`itspca::itspca`]). It is started from a diagonal-thresholding
//! initialisation ([`dtspca::dtspca`]), and the subspace dimension can be
//! chosen from the data ([`rank`]). The [`bench`] module runs seeded Monte
//! Carlo experiments on wavelet-transformed test curves.
//!
//! ```
//! use sparsepca::prelude::*;
//!
//! let spec = ExperimentSpec {
//!     p: 128,
//!     n: 200,
//!     ..ExperimentSpec::single_spike(SignalName::Peak, 25.0, 1)
//! };
//! let model = spec.analysis_model().unwrap();
//! let data = generate(&model, spec.n, 7).unwrap();
//! let out = run_pipeline(data, &PipelineConfig::default()).unwrap();
//! let fit = out.fit.expect("one spike is detected");
//! let loss = subspace_loss(model.eigvecs(), &fit.basis).unwrap();
//! assert!(loss < 0.2);
//! ```

pub mod bench;
pub mod dataio;
pub mod diagnostics;
pub mod dtspca;
pub mod error;
pub mod itspca;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod rank;
pub mod threshold;
pub mod wavelet;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::bench::{
        emit_report, run_experiment, run_suite, table1_specs, table2_specs, ExperimentReport,
        ExperimentSpec, Method, MValues, ReportFormat,
    };
    pub use crate::diagnostics::{oracle_quantities, weak_lr_radius, OracleQuantities};
    pub use crate::dtspca::{dtspca, InitResult};
    pub use crate::error::{Error, Result};
    pub use crate::itspca::{itspca, kstar, threshold_levels, FitConfig, FitResult, StopReason, Stopping};
    pub use crate::linalg::{largest_principal_angle_sin2, sym_eigen, thin_qr, OrthoBasis, SymMatrix};
    pub use crate::metrics::{eigvec_loss, subspace_loss, LossRecord};
    pub use crate::model::{estimate_noise_var, generate, sample_cov, DataSet, SampleCovWithN, SpikedModel};
    pub use crate::pipeline::{run_pipeline, MChoice, NoiseLevel, PipelineConfig};
    pub use crate::rank::{estimate_nspike, estimate_rank, select_m, RankEstimate};
    pub use crate::threshold::{eta, threshold_matrix, ThresholdKind};
    pub use crate::wavelet::{dwt, idwt, test_signal, SignalName, TestSignal, WaveletSpec};
}
