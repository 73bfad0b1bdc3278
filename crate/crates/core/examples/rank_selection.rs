//! Estimate the number of spikes and pick the subspace dimension for each
//! of the four-spike configurations, then fit at the selected dimension.

use sparsepca::bench::TABLE2_SPIKES;
use sparsepca::prelude::*;

fn main() -> Result<()> {
    for (i, spikes) in TABLE2_SPIKES.iter().enumerate() {
        let spec = ExperimentSpec::multi_spike(*spikes, 1);
        let model = spec.analysis_model()?;
        let data = generate(&model, spec.n, 100 + i as u64)?;
        let out = run_pipeline(data, &PipelineConfig::default())?;
        let ratios: Vec<String> = out.rank.gap_ratios.iter().map(|r| format!("{r:.2}")).collect();
        print!(
            "spikes {:?}: nspike_hat = {}, m = {}, gap ratios [{}]",
            spikes,
            out.rank.nspike_hat,
            out.m,
            ratios.join(", ")
        );
        match &out.fit {
            Some(fit) => {
                let truth = model.eigvecs().leading(out.m.min(model.n_spikes()))?;
                println!(", loss {:.4}", subspace_loss(&truth, &fit.basis)?);
            }
            None => println!(", no signal"),
        }
    }
    Ok(())
}
