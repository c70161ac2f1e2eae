//! Draw a VAR(1) sample with a quadratic target and compare sample moments
//! with the exact ones.

use pcrlab::dgp::write_sample_csv;
use pcrlab::{Coefficients, DgpSpec, EigvecStyle, Link, Simulator};

fn main() -> pcrlab::Result<()> {
    let mut spec = DgpSpec::spiked(5, 1, 1.0, 2.0, 1.0);
    spec.rho = 0.5;
    spec.eigvec_style = EigvecStyle::Haar;
    spec.seed = 11;
    spec.link = Link::LinearPlusQuadratic {
        theta: Coefficients::Eigen {
            scores: vec![1.0],
            tail: vec![0.5],
        },
        q: 0.25,
        w: Coefficients::Eigen {
            scores: vec![1.0],
            tail: vec![],
        },
    };
    let sim = Simulator::new(&spec)?;

    let head = sim.sample(3, 1)?;
    write_sample_csv(&head, std::io::stdout())?;

    let big = sim.sample(200_000, 2)?;
    let m = sim.moments();
    let t = big.t() as f64;
    let m_yy = big.y.dot(&big.y) / t;
    let sxy = big.x.t().dot(&big.y) / t;
    println!("E[Y^2]: exact {:.4}, sample {:.4}", m.m_yy(), m_yy);
    println!("E[X Y]: exact {:.4}\n        sample {:.4}", m.sigma_xy(), sxy);
    Ok(())
}
