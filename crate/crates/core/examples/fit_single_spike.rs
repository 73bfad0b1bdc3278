//! Simulate one spike on the three-peak curve, move to the wavelet domain,
//! and compare the ITSPCA estimate with its DTSPCA starting point.

use sparsepca::prelude::*;
use sparsepca::pipeline::prepare;

fn main() -> Result<()> {
    let spec = ExperimentSpec::single_spike(SignalName::Peak, 25.0, 1);
    let model = spec.analysis_model()?;
    let data = generate(&model, spec.n, 2024)?;
    println!("n = {}, p = {}, spike = {}", data.n(), data.p(), model.spikes()[0]);

    let prepared = prepare(data, NoiseLevel::Estimate, 3.0)?;
    println!(
        "sigma^2 estimate {:.4}; screening kept {} coordinates (alpha_n = {:.4})",
        prepared.sigma2,
        prepared.init.card_b(),
        prepared.init.alpha_n
    );

    let start = prepared.init.q0.leading(1)?;
    println!("DTSPCA loss            {:.5}", subspace_loss(model.eigvecs(), &start)?);

    for kind in [ThresholdKind::Soft, ThresholdKind::Hard] {
        let cfg = FitConfig { kind, ..FitConfig::new(1) };
        let fit = itspca(&prepared.s, &prepared.init, &cfg)?;
        println!(
            "ITSPCA ({kind}) loss     {:.5}  support {:>3}  iterations {} ({:?})",
            subspace_loss(model.eigvecs(), &fit.basis)?,
            fit.support.len(),
            fit.iterations,
            fit.stop_reason
        );
    }
    Ok(())
}
