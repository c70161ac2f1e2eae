//! Small-ball probe for a Gaussian design against the normal-CDF value.

use pcrlab::dgp::probe_small_ball;
use pcrlab::{DgpSpec, EigvecStyle};

fn main() -> pcrlab::Result<()> {
    let mut spec = DgpSpec::spiked(10, 2, 1.0, 1.0, 0.5);
    spec.eigvec_style = EigvecStyle::Haar;
    for kappa in [0.25, 0.5, 1.0] {
        let freq = probe_small_ball(&spec, kappa, 20, 50_000)?;
        println!("kappa1 = {kappa}: min frequency over 20 directions {freq:.4}");
    }
    println!("Gaussian value at kappa1 = 0.5: 0.6171");
    Ok(())
}
