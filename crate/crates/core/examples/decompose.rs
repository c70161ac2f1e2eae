//! Exact excess risk of one PCR fit next to the four terms that bound it.

use pcrlab::{
    build_population_pca, decompose_excess_risk, min_norm_blp, pcr_fit, rotation_and_infeasible, Coefficients, DgpSpec,
    Link, Simulator,
};

fn main() -> pcrlab::Result<()> {
    let mut spec = DgpSpec::spiked(200, 1, 0.75, 1.0, 1.0);
    spec.rho = 0.3;
    spec.link = Link::Linear {
        theta: Coefficients::Eigen {
            scores: vec![1.0],
            tail: vec![0.3],
        },
    };
    let sim = Simulator::new(&spec)?;
    let moments = sim.moments();
    let theta = min_norm_blp(&moments)?;
    let pca = build_population_pca(sim.covariance(), &theta, 1)?;

    for t in [100, 400, 1600] {
        let sample = sim.sample(t, t as u64)?;
        let fit = pcr_fit(&sample, 1)?;
        let rot = rotation_and_infeasible(&fit, &pca, &sample)?;
        let d = decompose_excess_risk(&fit, &rot, &pca, &moments, &sample)?;
        println!(
            "T={t:5}  excess {:.5}  <=  {:.5} + {:.5} + {:.5} + {:.5}  (slack {:.5})",
            d.excess_risk_exact, d.term_pc_estimation, d.term_rotation_gap, d.term_ls_gap, d.term_approx, d.bound_slack
        );
    }
    Ok(())
}
