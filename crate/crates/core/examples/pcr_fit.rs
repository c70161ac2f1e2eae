//! Fit PCR on a wide sample (p > T) and check it against least squares
//! constrained to the leading sample eigenspace.

use pcrlab::{constrained_erm_fit, pcr_fit, simulate, DgpSpec};

fn main() -> pcrlab::Result<()> {
    let mut spec = DgpSpec::spiked(300, 3, 1.0, 1.0, 1.0);
    spec.spike_constants = vec![3.0, 2.0, 1.0];
    spec.seed = 5;
    let sample = simulate(&spec, 120)?;

    let fit = pcr_fit(&sample, 3)?;
    let erm = constrained_erm_fit(&sample, 3)?;
    let gap = (&sample.x.dot(&fit.theta_hat) - &sample.x.dot(&erm))
        .mapv(f64::abs)
        .fold(0.0_f64, |m, v| m.max(*v));
    println!("{}", serde_json::to_string_pretty(&fit.report(&sample))?);
    println!("largest prediction gap to constrained least squares: {gap:.2e}");
    Ok(())
}
