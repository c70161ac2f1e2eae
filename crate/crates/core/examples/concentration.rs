//! Concentration events and norms behind the excess-risk bound as T grows.

use pcrlab::harness::{run_sweep, Cell, SpecTemplate, SweepConfig};
use pcrlab::{Coefficients, EigvecStyle, Link};

fn main() -> pcrlab::Result<()> {
    let template = SpecTemplate {
        alpha: 1.0,
        spike_constants: vec![1.0],
        tail_constant: 1.0,
        rho: 0.2,
        link: Link::Linear {
            theta: Coefficients::Eigen {
                scores: vec![1.0],
                tail: vec![],
            },
        },
        noise_sd: 1.0,
        eigvec_style: EigvecStyle::Identity,
    };
    let grid = [100, 400, 1600].iter().map(|&t| Cell { t, p: 30, k: 1 }).collect();
    let config = SweepConfig {
        template,
        grid,
        replications: 100,
        seed: 3,
        diagnostics: true,
        r_alpha_proxy: 4.0,
        threads: 1,
    };
    for c in run_sweep(&config)? {
        let d = c.diagnostics.expect("diagnostics requested");
        println!(
            "T={:5}  P(eig) {:.2}  P(cov) {:.2}  P(gram) {:.2}  ||HH'-I|| {:.4}  ||P_hat-PH'||/sqrt(T) {:.4}",
            c.cell.t,
            d.eigenvalue_event_freq,
            d.covariance_event_freq,
            d.score_gram_event_freq,
            d.median_rotation_deviation,
            d.median_score_deviation
        );
    }
    Ok(())
}
