use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sparsepca::bench::ExperimentSpec;
use sparsepca::diagnostics::{beta_for, high_signal_set, oracle_quantities, tau, SparsityClass};
use sparsepca::dtspca::{alpha_n, dtspca, InitResult};
use sparsepca::itspca::{itspca, kstar, threshold_levels, FitConfig, FitResult, StopReason, Stopping};
use sparsepca::linalg::{largest_principal_angle_sin2, OrthoBasis, SymMatrix};
use sparsepca::model::{generate, sample_cov, SampleCovWithN, SpikedModel};
use sparsepca::pipeline::{prepare, NoiseLevel};
use sparsepca::rank::{delta_k, estimate_nspike, estimate_rank, select_m, t_k};
use sparsepca::threshold::ThresholdKind;
use sparsepca::wavelet::SignalName;

fn random_psd(seed: u64, p: usize) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Array2::from_shape_fn((p, p + 3), |_| StandardNormal.sample(&mut rng));
    SymMatrix::new(g.dot(&g.t()) / p as f64).unwrap()
}

/// Modified Gram–Schmidt, independent of the library's Householder QR.
fn gram_schmidt(mut a: Array2<f64>) -> Array2<f64> {
    for j in 0..a.ncols() {
        for k in 0..j {
            let proj = a.column(k).dot(&a.column(j));
            let qk = a.column(k).to_owned();
            a.column_mut(j).scaled_add(-proj, &qk);
        }
        let norm = a.column(j).dot(&a.column(j)).sqrt();
        a.column_mut(j).mapv_inplace(|v| v / norm);
    }
    a
}

fn small_problem(seed: u64) -> (SpikedModel, SampleCovWithN) {
    let spec = ExperimentSpec {
        p: 128,
        n: 300,
        ..ExperimentSpec::single_spike(SignalName::Peak, 30.0, 1)
    };
    let model = spec.analysis_model().unwrap();
    let data = generate(&model, spec.n, seed).unwrap();
    let s = sample_cov(&data).unwrap();
    (model, s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_threshold_matches_classical_orthogonal_iteration(seed in any::<u64>(), k in 1usize..8) {
        let p = 20;
        let a = random_psd(seed, p);
        let s = SampleCovWithN::new(a.clone(), 100).unwrap();
        let init = dtspca(&s, 1.0, 1e-6).unwrap();
        prop_assert_eq!(init.card_b(), p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let start = gram_schmidt(Array2::from_shape_fn((p, 2), |_| StandardNormal.sample(&mut rng)));
        let init = InitResult { q0: OrthoBasis::new(start.clone()).unwrap(), ..init };

        let cfg = FitConfig { gamma: 0.0, stopping: Stopping::MaxIters(k), ..FitConfig::new(2) };
        let fit = itspca(&s, &init, &cfg).unwrap();
        prop_assert_eq!(fit.iterations, k);
        prop_assert_eq!(fit.stop_reason, StopReason::ReachedMaxIters);

        let mut q = start;
        for _ in 0..k {
            q = gram_schmidt(a.view().dot(&q));
        }
        let oracle = OrthoBasis::new(q).unwrap();
        prop_assert!(largest_principal_angle_sin2(&oracle, &fit.basis).unwrap() <= 1e-10);
    }

    #[test]
    fn screening_grows_as_alpha_shrinks(seed in 0u64..1000) {
        let (_, s) = small_problem(seed);
        let diag = s.s.diag();
        let mut prev: Vec<usize> = Vec::new();
        for alpha in [6.0, 4.0, 3.0, 2.0, 1.0] {
            let Ok(init) = dtspca(&s, alpha, 1.0) else { continue };
            let level = 1.0 + alpha_n(alpha, s.p(), s.n);
            let expect: Vec<usize> = (0..s.p()).filter(|&i| diag[i] >= level).collect();
            prop_assert_eq!(&init.b_set, &expect);
            prop_assert!(prev.iter().all(|i| init.b_set.contains(i)));
            prop_assert!(init.ell_b.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(init.ell_b.iter().all(|&l| l >= 1.0));
            let outside: Vec<usize> = (0..s.p()).filter(|i| !init.b_set.contains(i)).collect();
            for i in outside {
                prop_assert!(init.q0.view().row(i).iter().all(|v| *v == 0.0));
            }
            prev = init.b_set.clone();
        }
    }

    #[test]
    fn fit_invariants(seed in 0u64..1000, gamma in 0.5f64..4.0, hard in any::<bool>()) {
        let (_, s) = small_problem(seed);
        let Ok(init) = dtspca(&s, 3.0, 1.0) else { return Ok(()) };
        let kind = if hard { ThresholdKind::Hard } else { ThresholdKind::Soft };
        let cfg = FitConfig { gamma, kind, ..FitConfig::new(1) };
        let Ok(fit) = itspca(&s, &init, &cfg) else { return Ok(()) };
        prop_assert!(fit.basis.orthonormality_defect() <= 1e-10);
        prop_assert_eq!(&fit.support, &fit.basis.support());
        prop_assert_eq!(&fit.thresholds, &threshold_levels(&init.ell_b, 1, s.n, s.p(), gamma));
        let json = serde_json::to_string(&fit).unwrap();
        let back: FitResult = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, fit);
    }
}

#[test]
fn theoretical_stopping_runs_kstar_iterations() {
    let (_, s) = small_problem(3);
    let init = dtspca(&s, 3.0, 1.0).unwrap();
    let cfg = FitConfig { stopping: Stopping::Theoretical, ..FitConfig::new(1) };
    let fit = itspca(&s, &init, &cfg).unwrap();
    assert_eq!(fit.iterations, kstar(&init.ell_b, 1, s.n).unwrap());
    assert_eq!(fit.stop_reason, StopReason::ReachedKstar);

    let capped = FitConfig { max_iters_cap: Some(2), ..cfg };
    let fit = itspca(&s, &init, &capped).unwrap();
    assert_eq!((fit.iterations, fit.stop_reason), (2, StopReason::CapHit));
}

#[test]
fn empirical_and_theoretical_rules_agree_closely() {
    let (model, s) = small_problem(4);
    let init = dtspca(&s, 3.0, 1.0).unwrap();
    let emp = itspca(&s, &init, &FitConfig::new(1)).unwrap();
    let theo = itspca(&s, &init, &FitConfig { stopping: Stopping::Theoretical, ..FitConfig::new(1) }).unwrap();
    let truth = model.eigvecs();
    let (le, lt) = (
        largest_principal_angle_sin2(truth, &emp.basis).unwrap(),
        largest_principal_angle_sin2(truth, &theo.basis).unwrap(),
    );
    assert!((le - lt).abs() < 0.1 * le.max(lt) + 1e-6, "{le} vs {lt}");
}

fn init_with_ell(ell: &[f64]) -> InitResult {
    let k = ell.len();
    InitResult {
        b_set: (0..k).collect(),
        ell_b: ell.to_vec(),
        q0: OrthoBasis::coordinate(k.max(1), &(0..k).collect::<Vec<_>>()).unwrap(),
        alpha_n: 0.1,
    }
}

#[test]
fn rank_worked_example() {
    let (n, p) = (1024, 2048);
    let t5 = t_k(5, n, p);
    assert!((t5 * t5 - 0.12887).abs() < 1e-4);
    assert!((t5 - 0.3590).abs() < 1e-4);
    assert!((delta_k(5, n, p) - 1.0417).abs() < 1e-3);
    let init = init_with_ell(&[30.0, 2.2, 1.5, 1.1, 1.0]);
    assert_eq!(estimate_nspike(&init, n, p), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn nspike_is_monotone_and_bounded(
        mut ell in prop::collection::vec(1.0f64..60.0, 1..8),
        bump in 0.0f64..5.0,
        idx in 0usize..8,
        kappa in 1.0f64..30.0,
    ) {
        ell.sort_by(|a, b| b.total_cmp(a));
        let (n, p) = (500, 1000);
        let base = init_with_ell(&ell);
        let k = estimate_nspike(&base, n, p);
        prop_assert!(k <= ell.len());

        let j = idx % ell.len();
        let mut raised = ell.clone();
        raised[j] += bump;
        raised.sort_by(|a, b| b.total_cmp(a));
        prop_assert!(estimate_nspike(&init_with_ell(&raised), n, p) >= k);

        let m = select_m(&base, k, kappa);
        prop_assert!(m <= k);
        let est = estimate_rank(&base, n, p, kappa);
        prop_assert_eq!((est.nspike_hat, est.m_selected), (k, m));
        prop_assert_eq!(est.gap_ratios.len(), k);
        if m > 0 {
            prop_assert!(est.gap_ratios[m - 1] <= kappa);
        }
    }
}

#[test]
fn diagnostics_monotonicity() {
    let spec = ExperimentSpec::single_spike(SignalName::Peak, 25.0, 1);
    let model = spec.analysis_model().unwrap();
    let q = model.eigvecs().clone();
    let at = |spike: f64, p_scale: usize| {
        let m = SpikedModel::new(vec![spike], q.clone(), 1.0).unwrap();
        tau(&m, 1024 / p_scale)[0]
    };
    assert!(at(100.0, 1) < at(25.0, 1));
    // Fewer samples relative to p raise the noise scale.
    assert!(at(25.0, 1) < at(25.0, 2));

    let small = high_signal_set(&model, 1024, 0.01);
    let large = high_signal_set(&model, 1024, 0.05);
    assert!(large.iter().all(|i| small.contains(i)));
}

#[test]
fn high_signal_set_respects_weak_lr_count_bound() {
    // |{ν : |q_ν| ≥ x}| ≤ (s/x)^r for q in a weak-ℓr ball of radius s, so
    // card(H(β)) ≤ β^{-r} Σ_j s_j^r / τ_j^r whenever M_n is not capped by p.
    for name in SignalName::ALL {
        for spike in [100.0, 25.0, 5.0] {
            let spec = ExperimentSpec::single_spike(name, spike, 1);
            let model = spec.analysis_model().unwrap();
            for r in [0.5, 1.0, 1.5] {
                for gamma in [3.5, 4.0, 6.0] {
                    let oq = oracle_quantities(&model, spec.n, gamma, 1, r).unwrap();
                    let sc = SparsityClass::of_model(&model, r).unwrap();
                    let bound: f64 = sc.radii.iter().zip(&oq.tau).map(|(s, t)| (s / (oq.beta * t)).powf(r)).sum();
                    assert!(oq.h_set.len() as f64 <= bound + 1e-9, "{name} {spike} r={r} gamma={gamma}");
                    assert_eq!(oq.beta, beta_for(gamma, 1));
                    assert!(oq.m_n <= spec.p as f64);
                }
            }
        }
    }
}

#[test]
fn known_and_estimated_noise_agree_on_scaled_data() {
    let spec = ExperimentSpec { p: 128, n: 400, ..ExperimentSpec::single_spike(SignalName::Sing, 20.0, 1) };
    let model = spec.analysis_model().unwrap();
    let mut data = generate(&model, spec.n, 9).unwrap();
    data.scale(3.0);
    let known = prepare(data.clone(), NoiseLevel::Known(9.0), 3.0).unwrap();
    let est = prepare(data, NoiseLevel::Estimate, 3.0).unwrap();
    assert!((est.sigma2 - 9.0).abs() < 0.5);
    let (bk, be): (Vec<usize>, Vec<usize>) = (known.init.b_set, est.init.b_set);
    let common = bk.iter().filter(|i| be.contains(i)).count();
    assert!(common * 10 >= 8 * bk.len().max(be.len()));
}
