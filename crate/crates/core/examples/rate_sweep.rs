//! Small strong-signal sweep with `p = T` and the fitted log-log slope of the
//! mean excess risk.

use pcrlab::harness::{expand_grid, fit_rate, run_sweep, Response, SizeRule, SpecTemplate, SweepConfig};
use pcrlab::{Coefficients, EigvecStyle, Link};

fn main() -> pcrlab::Result<()> {
    let template = SpecTemplate {
        alpha: 1.0,
        spike_constants: vec![1.0],
        tail_constant: 1.0,
        rho: 0.0,
        link: Link::Linear {
            theta: Coefficients::Eigen {
                scores: vec![1.0],
                tail: vec![],
            },
        },
        noise_sd: 1.0,
        eigvec_style: EigvecStyle::Identity,
    };
    let grid = expand_grid(&[50, 100, 200, 400], "p = T".parse()?, SizeRule::constant(1), None)?;
    let config = SweepConfig {
        template,
        grid,
        replications: 60,
        seed: 1,
        diagnostics: false,
        r_alpha_proxy: f64::INFINITY,
        threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let cells = run_sweep(&config)?;
    for c in &cells {
        println!(
            "T={:4} p={:4}  mean excess {:.5} (se {:.5})  median {:.5}",
            c.cell.t, c.cell.p, c.mean_excess, c.se_excess, c.median_excess
        );
    }
    let fit = fit_rate(&cells, Response::MeanExcess)?;
    println!("slope {:.3}, R^2 {:.3}", fit.slope, fit.r_squared);
    Ok(())
}
