//! Weak spike with a loading outside the leading eigenspace: the excess risk
//! settles at the approximation error, which is half the bounding term.

use pcrlab::harness::{run_sweep, Cell, SpecTemplate, SweepConfig};
use pcrlab::{Coefficients, EigvecStyle, Link};

fn main() -> pcrlab::Result<()> {
    let template = SpecTemplate {
        alpha: 0.75,
        spike_constants: vec![1.0],
        tail_constant: 1.0,
        rho: 0.0,
        link: Link::Linear {
            theta: Coefficients::Eigen {
                scores: vec![1.0],
                tail: vec![0.3],
            },
        },
        noise_sd: 1.0,
        eigvec_style: EigvecStyle::Identity,
    };
    let grid = [100, 200, 400, 800].iter().map(|&t| Cell { t, p: 400, k: 1 }).collect();
    let config = SweepConfig {
        template,
        grid,
        replications: 50,
        seed: 4,
        diagnostics: false,
        r_alpha_proxy: f64::INFINITY,
        threads: 1,
    };
    for c in run_sweep(&config)? {
        println!(
            "T={:4}  mean excess {:.5}  approximation error {:.5}  bounding term {:.5}",
            c.cell.t, c.mean_excess, c.approximation_error, c.mean_term_approx
        );
    }
    Ok(())
}
