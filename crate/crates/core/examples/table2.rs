//! Four-spike simulation: mean subspace loss for m = 1..4 and how often the
//! data-driven rank selection recovers four spikes.
//!
//! ```text
//! cargo run --release --example table2 -- [replicates]
//! ```

use sparsepca::bench::{run_experiment, table2_specs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let replicates: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    for spec in table2_specs(replicates, 0) {
        let report = run_experiment(&spec)?;
        println!("spikes {:?}", spec.spikes);
        for cell in &report.cells {
            println!(
                "  {:<36} m={} loss {:.4} (se {:.4})",
                cell.method, cell.m, cell.mean_loss, cell.se_loss
            );
        }
        println!("  nspike_hat counts {:?}, m counts {:?}", report.nspike_hat_freq, report.m_selected_freq);
    }
    Ok(())
}
