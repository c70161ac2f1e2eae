//! Population side of PCR: spiked covariance, best linear predictor and its
//! split into a score part and an idiosyncratic part.

use pcrlab::risk::approximation_error;
use pcrlab::{build_population_pca, exact_moments, min_norm_blp, Coefficients, DgpSpec, Link, Simulator};

fn main() -> pcrlab::Result<()> {
    let mut spec = DgpSpec::spiked(50, 2, 0.8, 1.0, 1.0);
    spec.spike_constants = vec![2.0, 1.0];
    spec.link = Link::Linear {
        theta: Coefficients::Eigen {
            scores: vec![1.0, 0.5],
            tail: vec![0.3, 0.1],
        },
    };

    let sim = Simulator::new(&spec)?;
    let cov = sim.covariance();
    println!(
        "leading eigenvalues: {:.4} {:.4}, first tail {:.4}",
        cov.values()[0],
        cov.values()[1],
        cov.values()[2]
    );

    let moments = exact_moments(&spec)?;
    let theta = min_norm_blp(&moments)?;
    let pca = build_population_pca(cov, &theta, 2)?;
    println!("vartheta* = {:.4}", pca.vartheta_star);
    println!("||gamma*|| = {:.4}", pca.gamma_star.dot(&pca.gamma_star).sqrt());
    println!("approximation error = {:.6}", approximation_error(&pca));
    Ok(())
}
