//! Single-spike simulation: mean subspace loss of ITSPCA and DTSPCA for
//! each test curve and spike size at p = 2048, n = 1024.
//!
//! ```text
//! cargo run --release --example table1 -- [replicates] [curve ...]
//! ```

use sparsepca::bench::{run_experiment, table1_specs};
use sparsepca::wavelet::SignalName;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let replicates: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);
    let curves: Vec<SignalName> = args.map(|s| s.parse()).collect::<Result<_, _>>()?;

    println!("{:<6} {:>7} {:<40} {:>10} {:>10} {:>8} {:>7}", "curve", "lambda2", "method", "loss", "se", "size", "iters");
    for spec in table1_specs(replicates, 0) {
        if !curves.is_empty() && !curves.contains(&spec.eigvec_sources[0]) {
            continue;
        }
        let report = run_experiment(&spec)?;
        for cell in &report.cells {
            println!(
                "{:<6} {:>7} {:<40} {:>10.4} {:>10.4} {:>8.1} {:>7.1}",
                cell.label, cell.lambda2[0], cell.method, cell.mean_loss, cell.se_loss, cell.mean_size, cell.mean_iters
            );
        }
    }
    Ok(())
}
