//! The four test curves and how compactly Symmlet 8 represents them.

use sparsepca::diagnostics::weak_lr_radius;
use sparsepca::prelude::*;

fn main() -> Result<()> {
    let p = 2048;
    let spec = WaveletSpec::default_for(p);
    println!("p = {p}, {} decomposition levels", spec.levels);
    println!("{:<6} {:>12} {:>12} {:>12}", "curve", "|c|>0.01", "tail@50", "weak-l1");
    for name in SignalName::ALL {
        let sig = test_signal(name, p)?;
        let coeffs = dwt(&sig.values, spec)?;
        let mut energy: Vec<f64> = coeffs.iter().map(|c| c * c).collect();
        energy.sort_by(|a, b| b.total_cmp(a));
        let tail: f64 = energy[50..].iter().sum();
        let big = coeffs.iter().filter(|c| c.abs() > 0.01).count();
        let radius = weak_lr_radius(ndarray::ArrayView1::from(&coeffs), 1.0);
        println!("{:<6} {:>12} {:>12.2e} {:>12.3}", name, big, tail, radius);

        let back = idwt(&coeffs, spec)?;
        let err = back.iter().zip(&sig.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "reconstruction error {err}");
    }
    Ok(())
}
