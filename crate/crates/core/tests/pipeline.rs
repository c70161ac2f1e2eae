use ndarray::{Array1, Array2};
use ndarray_linalg::QR;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use pcrlab::harness::{run_sweep, Cell, SpecTemplate, SweepConfig};
use pcrlab::risk::{residual_rate_inputs, RateInputs};
use pcrlab::{
    build_population_pca, decompose_excess_risk, min_norm_blp, pcr_fit, rotation_and_infeasible, Coefficients, DgpSpec,
    EigvecStyle, Link, Sample, Simulator,
};

fn gaussian(seed: u64, rows: usize, cols: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut rng))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn predictions_are_rotation_equivariant(seed in 0u64..10_000, t in 8usize..40, p in 3usize..12, k in 1usize..3) {
        let k = k.min(p - 1);
        let x = gaussian(seed, t, p);
        let y = Array1::from_iter(gaussian(seed + 1, t, 1).iter().copied());
        let (q, _) = gaussian(seed + 2, p, p).qr().unwrap();
        let a = pcr_fit(&Sample::new(x.clone(), y.clone()).unwrap(), k).unwrap();
        let b = pcr_fit(&Sample::new(x.dot(&q), y).unwrap(), k).unwrap();
        let pa = x.dot(&a.theta_hat);
        let pb = x.dot(&q).dot(&b.theta_hat);
        let gap = (&pa - &pb).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        prop_assert!(gap <= 1e-8 * (1.0 + pa.iter().fold(0.0_f64, |m, v| m.max(v.abs()))));
    }

    #[test]
    fn coefficients_are_linear_in_the_target(seed in 0u64..10_000, c in -3.0f64..3.0) {
        let x = gaussian(seed, 30, 6);
        let y = Array1::from_iter(gaussian(seed + 1, 30, 1).iter().copied());
        let a = pcr_fit(&Sample::new(x.clone(), y.clone()).unwrap(), 2).unwrap();
        let b = pcr_fit(&Sample::new(x, &y * c).unwrap(), 2).unwrap();
        for (u, v) in a.theta_hat.iter().zip(b.theta_hat.iter()) {
            prop_assert!((u * c - v).abs() <= 1e-9 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn decomposition_bound_holds(seed in 0u64..10_000, t in 20usize..120, rho in 0.0f64..0.8) {
        let mut spec = DgpSpec::spiked(15, 2, 0.8, 1.0, 1.0);
        spec.spike_constants = vec![2.0, 1.0];
        spec.rho = rho;
        spec.eigvec_style = EigvecStyle::Haar;
        spec.seed = seed;
        spec.link = Link::LinearPlusQuadratic {
            theta: Coefficients::Eigen { scores: vec![1.0, 1.0], tail: vec![0.5] },
            q: 0.5,
            w: Coefficients::Eigen { scores: vec![0.0, 1.0], tail: vec![] },
        };
        let sim = Simulator::new(&spec).unwrap();
        let moments = sim.moments();
        let theta = min_norm_blp(&moments).unwrap();
        let pca = build_population_pca(sim.covariance(), &theta, 2).unwrap();
        let sample = sim.sample(t, seed ^ 0xabc).unwrap();
        let fit = pcr_fit(&sample, 2).unwrap();
        let rot = rotation_and_infeasible(&fit, &pca, &sample).unwrap();
        let d = decompose_excess_risk(&fit, &rot, &pca, &moments, &sample).unwrap();
        prop_assert!(d.excess_risk_exact >= -1e-12 * d.scale());
        prop_assert!(d.bound_holds() != Some(false), "{d:?}");
    }
}

#[test]
fn exactly_representable_target_has_vanishing_risk() {
    // rank-K covariance, noiseless linear target
    let mut spec = DgpSpec::spiked(10, 2, 1.0, 1.0, 0.0);
    spec.spike_constants = vec![2.0, 1.0];
    spec.noise_sd = 0.0;
    spec.link = Link::Linear {
        theta: Coefficients::Eigen {
            scores: vec![1.0, -1.0],
            tail: vec![],
        },
    };
    let sim = Simulator::new(&spec).unwrap();
    let moments = sim.moments();
    let theta = min_norm_blp(&moments).unwrap();
    let pca = build_population_pca(sim.covariance(), &theta, 2).unwrap();
    for t in [20, 200, 2000] {
        let sample = sim.sample(t, 3).unwrap();
        let fit = pcr_fit(&sample, 2).unwrap();
        let rot = rotation_and_infeasible(&fit, &pca, &sample).unwrap();
        let d = decompose_excess_risk(&fit, &rot, &pca, &moments, &sample).unwrap();
        assert!(d.excess_risk_exact.abs() < 1e-10, "{d:?}");
        assert!(d.term_sum().abs() < 1e-10, "{d:?}");
    }
}

fn diagnostics_template() -> SpecTemplate {
    SpecTemplate {
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
    }
}

#[test]
fn event_frequencies_rise_with_sample_size() {
    // small p and weak spikes keep the events away from probability one
    let mut template = diagnostics_template();
    template.alpha = 0.6;
    template.spike_constants = vec![0.4];
    let grid: Vec<Cell> = [10, 20, 40, 80, 160].iter().map(|&t| Cell { t, p: 8, k: 1 }).collect();
    let config = SweepConfig {
        template,
        grid,
        replications: 400,
        seed: 12,
        diagnostics: true,
        r_alpha_proxy: f64::INFINITY,
        threads: 2,
    };
    let cells = run_sweep(&config).unwrap();
    let n = config.replications as f64;
    type Pick = fn(&pcrlab::harness::DiagnosticSummary) -> f64;
    let picks: [Pick; 3] = [
        |d| d.eigenvalue_event_freq,
        |d| d.covariance_event_freq,
        |d| d.score_gram_event_freq,
    ];
    for pick in picks {
        let freqs: Vec<f64> = cells.iter().map(|c| pick(c.diagnostics.as_ref().unwrap())).collect();
        let mut drops = 0;
        for w in freqs.windows(2) {
            let se = ((w[0] * (1.0 - w[0]) + w[1] * (1.0 - w[1])) / n).sqrt();
            if w[1] < w[0] {
                assert!(w[0] - w[1] <= 2.0 * se, "{freqs:?}");
                drops += 1;
            }
        }
        assert!(drops <= 1, "{freqs:?}");
    }
}

#[test]
fn residual_rate_inputs_track_the_sweep() {
    let mut spec = DgpSpec::spiked(40, 1, 1.0, 1.0, 1.0);
    spec.link = Link::Linear {
        theta: Coefficients::Eigen {
            scores: vec![1.0],
            tail: vec![0.3],
        },
    };
    let sim = Simulator::new(&spec).unwrap();
    let moments = sim.moments();
    let theta = min_norm_blp(&moments).unwrap();
    let pca = build_population_pca(sim.covariance(), &theta, 1).unwrap();
    let sample = sim.sample(100, 4).unwrap();
    let fit = pcr_fit(&sample, 1).unwrap();
    let rot = rotation_and_infeasible(&fit, &pca, &sample).unwrap();
    let d = decompose_excess_risk(&fit, &rot, &pca, &moments, &sample).unwrap();
    let RateInputs { residual, rate } = residual_rate_inputs(&d, 100, 40, 1, 1.0, f64::INFINITY).unwrap();
    assert_eq!(residual, d.estimation_part());
    let expected = 40f64.powf(-1.0) + (40.0 / (100.0 * 40.0)) * (40.0 / (100.0 * 40.0)) + 1.0 / 100.0;
    assert!((rate - expected).abs() < 1e-15);
}
