//! Oracle quantities of a known model next to what a fit actually selects:
//! the high-signal set H(beta), the support bound M_n, and the error terms.

use sparsepca::pipeline::prepare;
use sparsepca::prelude::*;

fn main() -> Result<()> {
    let gamma = 3.5;
    let spec = ExperimentSpec::single_spike(SignalName::Peak, 25.0, 1);
    let model = spec.analysis_model()?;
    let oq = oracle_quantities(&model, spec.n, gamma, 1, 1.0)?;
    println!("tau = {:.5}, beta = {:.4}, |H| = {}, M_n = {:.1}, eps = {:.5}", oq.tau[0], oq.beta, oq.h_set.len(), oq.m_n, oq.eps[0]);

    let mut excluded = 0;
    let runs = 10;
    for seed in 0..runs {
        let data = generate(&model, spec.n, seed)?;
        let prepared = prepare(data, NoiseLevel::Estimate, spec.alpha)?;
        let cfg = FitConfig { gamma, ..FitConfig::new(1) };
        let fit = itspca(&prepared.s, &prepared.init, &cfg)?;
        let inside = fit.support.iter().all(|i| oq.h_set.binary_search(i).is_ok());
        excluded += inside as usize;
        println!(
            "seed {seed}: support {:>3}, inside H: {inside}, loss {:.4}",
            fit.support.len(),
            subspace_loss(model.eigvecs(), &fit.basis)?
        );
    }
    println!("correct exclusion in {excluded}/{runs} runs");
    Ok(())
}
