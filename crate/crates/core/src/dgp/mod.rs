//! Synthetic data: spiked-covariance Gaussian predictors following a
//! stationary VAR(1), targets from a linear or linear-plus-quadratic link,
//! and the exact second moments of the resulting process.

mod csv_io;

pub use csv_io::{read_sample_csv, write_sample_csv};

use ndarray::{Array1, Array2, Axis, Zip};
use ndarray_linalg::QR;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PcrError, Result};
use crate::linmodel::{CovarianceModel, JointMoments};
use crate::rng;

/// A coefficient vector, either given explicitly or through eigen-coordinates
/// of the covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficients {
    Explicit(Vec<f64>),
    /// `V_K Lambda_K^{-1/2} scores + sum_j tail[j] v_{K+j}`. The score part
    /// is the population-score coefficient vector of the predictor; `tail`
    /// loads directly on the trailing eigenvectors.
    Eigen {
        scores: Vec<f64>,
        tail: Vec<f64>,
    },
}

impl Coefficients {
    pub fn resolve(&self, cov: &CovarianceModel) -> Result<Array1<f64>> {
        let p = cov.p();
        let k = cov.k();
        let out = match self {
            Coefficients::Explicit(v) => {
                if v.len() != p {
                    return Err(PcrError::InvalidSpec(format!(
                        "explicit coefficient vector has length {}, expected {p}",
                        v.len()
                    )));
                }
                Array1::from(v.clone())
            }
            Coefficients::Eigen { scores, tail } => {
                if scores.len() > k || tail.len() > p - k {
                    return Err(PcrError::InvalidSpec(format!(
                        "eigen coefficients ({} scores, {} tail) exceed K = {k}, p - K = {}",
                        scores.len(),
                        tail.len(),
                        p - k
                    )));
                }
                let mut out = Array1::zeros(p);
                for (i, s) in scores.iter().enumerate() {
                    let lam = cov.values()[i];
                    out.scaled_add(s / lam.sqrt(), &cov.vectors().column(i));
                }
                for (j, g) in tail.iter().enumerate() {
                    out.scaled_add(*g, &cov.vectors().column(k + j));
                }
                out
            }
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(PcrError::InvalidSpec("link coefficients must be finite".into()));
        }
        Ok(out)
    }

    fn is_finite(&self) -> bool {
        match self {
            Coefficients::Explicit(v) => v.iter().all(|x| x.is_finite()),
            Coefficients::Eigen { scores, tail } => scores.iter().chain(tail).all(|x| x.is_finite()),
        }
    }
}

/// Target link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Link {
    /// `Y = theta' X + noise`
    Linear { theta: Coefficients },
    /// `Y = theta' X + q ((w' X)^2 - E[(w' X)^2]) + noise`
    LinearPlusQuadratic {
        theta: Coefficients,
        q: f64,
        w: Coefficients,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigvecStyle {
    Identity,
    Haar,
}

/// Full description of a data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub p: usize,
    pub k: usize,
    pub alpha: f64,
    pub spike_constants: Vec<f64>,
    pub tail_constants: Vec<f64>,
    /// VAR(1) coefficient, in `[0, 1)`.
    pub rho: f64,
    pub link: Link,
    pub noise_sd: f64,
    pub eigvec_style: EigvecStyle,
    pub seed: u64,
}

impl DgpSpec {
    /// Equal spike constants and equal tail constants, identity eigenvectors,
    /// iid data and a linear target loading one unit on the first population score.
    pub fn spiked(p: usize, k: usize, alpha: f64, spike: f64, tail: f64) -> Self {
        Self {
            p,
            k,
            alpha,
            spike_constants: vec![spike; k],
            tail_constants: vec![tail; p.saturating_sub(k)],
            rho: 0.0,
            link: Link::Linear {
                theta: Coefficients::Eigen {
                    scores: vec![1.0],
                    tail: vec![],
                },
            },
            noise_sd: 1.0,
            eigvec_style: EigvecStyle::Identity,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.p {
            return Err(PcrError::ComponentCount { k: self.k, max: self.p });
        }
        if self.spike_constants.len() != self.k || self.tail_constants.len() != self.p - self.k {
            return Err(PcrError::InvalidSpec(format!(
                "expected {} spike and {} tail constants, got {} and {}",
                self.k,
                self.p - self.k,
                self.spike_constants.len(),
                self.tail_constants.len()
            )));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(PcrError::InvalidSpec(format!("rho = {} is outside [0, 1)", self.rho)));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(PcrError::InvalidSpec(format!(
                "noise_sd = {} must be >= 0",
                self.noise_sd
            )));
        }
        let finite = match &self.link {
            Link::Linear { theta } => theta.is_finite(),
            Link::LinearPlusQuadratic { theta, q, w } => theta.is_finite() && w.is_finite() && q.is_finite(),
        };
        if !finite {
            return Err(PcrError::InvalidSpec("link coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Observed data: `T` rows of predictors and the matching targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub spec: Option<DgpSpec>,
    pub seed_used: Option<u64>,
}

impl Sample {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(PcrError::Dimension(format!(
                "X has {} rows but Y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 {
            return Err(PcrError::InvalidSpec("a sample needs at least one observation".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(PcrError::InvalidSpec("sample contains non-finite values".into()));
        }
        Ok(Self {
            x,
            y,
            spec: None,
            seed_used: None,
        })
    }

    pub fn t(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Population covariance for a spec. Haar eigenvectors are drawn from a
/// stream keyed by the spec seed.
pub fn build_covariance(spec: &DgpSpec) -> Result<CovarianceModel> {
    spec.validate()?;
    match spec.eigvec_style {
        EigvecStyle::Identity => {
            CovarianceModel::with_identity_basis(spec.alpha, spec.spike_constants.clone(), spec.tail_constants.clone())
        }
        EigvecStyle::Haar => {
            let basis = haar_orthogonal(spec.p, rng::derive_seed(spec.seed, &[0xba515]))?;
            CovarianceModel::with_basis(
                spec.alpha,
                spec.spike_constants.clone(),
                spec.tail_constants.clone(),
                basis,
            )
        }
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn haar_orthogonal(p: usize, seed: u64) -> Result<Array2<f64>> {
    let mut rng = rng::stream(seed);
    let g = Array2::from_shape_simple_fn((p, p), || -> f64 { StandardNormal.sample(&mut rng) });
    let (mut q, r) = g.qr()?;
    for (j, mut col) in q.axis_iter_mut(Axis(1)).enumerate() {
        if r[[j, j]] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    Ok(q)
}

/// A spec resolved against its covariance: everything needed to draw samples
/// and to state the exact moments.
#[derive(Debug, Clone)]
pub struct Simulator {
    spec: DgpSpec,
    cov: CovarianceModel,
    factor: Option<Array2<f64>>,
    theta: Array1<f64>,
    quadratic: Option<Quadratic>,
}

#[derive(Debug, Clone)]
struct Quadratic {
    q: f64,
    w: Array1<f64>,
    /// `w' Sigma w`
    variance: f64,
}

impl Simulator {
    pub fn new(spec: &DgpSpec) -> Result<Self> {
        let cov = build_covariance(spec)?;
        Self::with_covariance(spec, cov)
    }

    /// Uses an already-built covariance (which must match the spec).
    pub fn with_covariance(spec: &DgpSpec, cov: CovarianceModel) -> Result<Self> {
        spec.validate()?;
        if cov.p() != spec.p || cov.k() != spec.k {
            return Err(PcrError::Dimension("covariance does not match the spec".into()));
        }
        let (theta, quadratic) = match &spec.link {
            Link::Linear { theta } => (theta.resolve(&cov)?, None),
            Link::LinearPlusQuadratic { theta, q, w } => {
                let w = w.resolve(&cov)?;
                let variance = cov.quadratic_form(w.view());
                (theta.resolve(&cov)?, Some(Quadratic { q: *q, w, variance }))
            }
        };
        let factor = if cov.is_identity_basis() {
            None
        } else {
            Some(cov.factor())
        };
        Ok(Self {
            spec: spec.clone(),
            cov,
            factor,
            theta,
            quadratic,
        })
    }

    pub fn spec(&self) -> &DgpSpec {
        &self.spec
    }

    pub fn covariance(&self) -> &CovarianceModel {
        &self.cov
    }

    /// Linear-link coefficient vector `theta` (not necessarily `theta*`).
    pub fn theta(&self) -> &Array1<f64> {
        &self.theta
    }

    /// Draws `t` observations from the stationary process using `seed`.
    pub fn sample(&self, t: usize, seed: u64) -> Result<Sample> {
        if t == 0 {
            return Err(PcrError::InvalidSpec("sample length T must be at least 1".into()));
        }
        let p = self.spec.p;
        let mut rng = rng::stream(seed);
        let mut z = Array2::from_shape_simple_fn((t, p), || -> f64 { StandardNormal.sample(&mut rng) });
        let e: Array1<f64> = if self.spec.noise_sd > 0.0 {
            Array1::from_shape_simple_fn(t, || -> f64 { StandardNormal.sample(&mut rng) })
        } else {
            Array1::zeros(t)
        };
        let rho = self.spec.rho;
        if rho != 0.0 {
            // unit-covariance VAR(1) started in its stationary law
            let innov = (1.0 - rho * rho).sqrt();
            for i in 1..t {
                let (prev, mut rest) = z.view_mut().split_at(Axis(0), i);
                let prev = prev.row(i - 1);
                let mut cur = rest.row_mut(0);
                Zip::from(&mut cur)
                    .and(&prev)
                    .for_each(|c, &pv| *c = rho * pv + innov * *c);
            }
        }
        let x = match &self.factor {
            None => {
                let roots = self.cov.values().mapv(f64::sqrt);
                z *= &roots.view().insert_axis(Axis(0));
                z
            }
            Some(factor) => z.dot(&factor.t()),
        };
        let mut y = x.dot(&self.theta);
        if let Some(quad) = &self.quadratic {
            let proj = x.dot(&quad.w);
            Zip::from(&mut y)
                .and(&proj)
                .for_each(|yv, &s| *yv += quad.q * (s * s - quad.variance));
        }
        y.scaled_add(self.spec.noise_sd, &e);
        Ok(Sample {
            x,
            y,
            spec: Some(self.spec.clone()),
            seed_used: Some(seed),
        })
    }

    /// Closed-form Gaussian moments of `(Y, X)`.
    pub fn moments(&self) -> JointMoments {
        let sigma_xy = self.cov.apply(self.theta.view());
        let mut m_yy = self.theta.dot(&sigma_xy) + self.spec.noise_sd * self.spec.noise_sd;
        if let Some(quad) = &self.quadratic {
            // Var((w'X)^2) = 2 (w' Sigma w)^2 for Gaussian X; the cross term with
            // theta'X is an odd moment and vanishes.
            m_yy += quad.q * quad.q * 2.0 * quad.variance * quad.variance;
        }
        JointMoments::from_covariance(&self.cov, sigma_xy, m_yy)
    }
}

/// Draws a sample of length `t` with the spec's own seed.
pub fn simulate(spec: &DgpSpec, t: usize) -> Result<Sample> {
    Simulator::new(spec)?.sample(t, spec.seed)
}

/// Closed-form joint moments for a spec.
pub fn exact_moments(spec: &DgpSpec) -> Result<JointMoments> {
    Ok(Simulator::new(spec)?.moments())
}

/// Minimum over random unit directions `delta` of the empirical frequency of
/// `|delta' X_t| >= kappa1 * ||delta' X_t||_{L2}`, using `draws` observations
/// from the process.
pub fn probe_small_ball(spec: &DgpSpec, kappa1: f64, directions: usize, draws: usize) -> Result<f64> {
    if !(kappa1 >= 0.0) {
        return Err(PcrError::InvalidSpec(format!("kappa1 = {kappa1} must be >= 0")));
    }
    let sim = Simulator::new(spec)?;
    let sample = sim.sample(draws, rng::derive_seed(spec.seed, &[0x5b, 1]))?;
    let mut dir_rng = rng::stream(rng::derive_seed(spec.seed, &[0x5b, 2]));
    let p = spec.p;
    let top = sim.cov.values()[0];
    let mut best: Option<f64> = None;
    for _ in 0..directions {
        let raw = Array1::from_shape_simple_fn(p, || -> f64 { StandardNormal.sample(&mut dir_rng) });
        let delta = &raw / raw.dot(&raw).sqrt();
        let variance = sim.cov.quadratic_form(delta.view());
        if variance <= 1e-12 * top {
            continue;
        }
        let threshold = kappa1 * variance.sqrt();
        let proj = sample.x.dot(&delta);
        let hits = proj.iter().filter(|v| v.abs() >= threshold).count();
        let freq = hits as f64 / draws as f64;
        best = Some(best.map_or(freq, |b: f64| b.min(freq)));
    }
    best.ok_or(PcrError::DegenerateDirections)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn four_dim() -> DgpSpec {
        let mut spec = DgpSpec::spiked(4, 1, 1.0, 2.0, 1.0);
        spec.link = Link::Linear {
            theta: Coefficients::Explicit(vec![1.0, 0.0, 0.0, 0.0]),
        };
        spec
    }

    #[test]
    fn covariance_from_spec() {
        let cov = build_covariance(&four_dim()).unwrap();
        assert_eq!(cov.values(), &array![8.0, 1.0, 1.0, 1.0]);

        let spec = DgpSpec::spiked(100, 2, 0.75, 1.0, 1.0);
        let cov = build_covariance(&spec).unwrap();
        let expected = 100f64.powf(0.75);
        assert!((cov.values()[0] - expected).abs() < 1e-12);
        assert!((cov.values()[1] - 31.622776601683793).abs() < 1e-10);
    }

    #[test]
    fn rank_k_covariance_round_trips() {
        let mut spec = DgpSpec::spiked(6, 2, 1.0, 1.0, 0.0);
        spec.spike_constants = vec![2.0, 1.0];
        spec.eigvec_style = EigvecStyle::Haar;
        let cov = build_covariance(&spec).unwrap();
        let sigma = cov.sigma();
        let eig = crate::linmodel::symmetric_eig(sigma.view()).unwrap();
        let rebuilt = eig.reconstruct();
        let err = (&rebuilt - &sigma).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-10 * 12.0);
        assert!(eig.values[2].abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let mut s = four_dim();
        s.rho = 1.0;
        assert!(s.validate().is_err());
        let mut s = four_dim();
        s.noise_sd = -0.1;
        assert!(s.validate().is_err());
        let mut s = four_dim();
        s.alpha = 0.4;
        assert!(build_covariance(&s).is_err());
        let mut s = four_dim();
        s.tail_constants = vec![0.5, 1.0, 1.0];
        assert!(build_covariance(&s).is_err());
        let mut s = four_dim();
        s.link = Link::Linear {
            theta: Coefficients::Explicit(vec![f64::NAN, 0.0, 0.0, 0.0]),
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn haar_basis_is_orthogonal() {
        let q = haar_orthogonal(30, 5).unwrap();
        let dev = (q.t().dot(&q) - Array2::<f64>::eye(30))
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(dev < 1e-12);
    }

    #[test]
    fn same_seed_same_sample() {
        let mut spec = four_dim();
        spec.rho = 0.4;
        spec.eigvec_style = EigvecStyle::Haar;
        spec.seed = 11;
        let a = simulate(&spec, 50).unwrap();
        let b = simulate(&spec, 50).unwrap();
        assert_eq!(a, b);
        spec.seed = 12;
        assert_ne!(a.x, simulate(&spec, 50).unwrap().x);
    }

    #[test]
    fn zero_length_refused() {
        assert!(simulate(&four_dim(), 0).is_err());
    }

    #[test]
    fn linear_moments() {
        let mut spec = DgpSpec::spiked(2, 1, 1.0, 0.5, 1.0);
        spec.link = Link::Linear {
            theta: Coefficients::Explicit(vec![1.0, 0.0]),
        };
        // c_1 p^alpha = 0.5 * 2 = 1, so Sigma = I
        let m = exact_moments(&spec).unwrap();
        assert_eq!(m.sigma(), &Array2::<f64>::eye(2));
        assert_eq!(m.sigma_xy(), &array![1.0, 0.0]);
        assert!((m.m_yy() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_only_moments() {
        let mut spec = DgpSpec::spiked(2, 1, 1.0, 0.5, 1.0);
        spec.noise_sd = 0.0;
        spec.link = Link::LinearPlusQuadratic {
            theta: Coefficients::Explicit(vec![0.0, 0.0]),
            q: 1.0,
            w: Coefficients::Explicit(vec![1.0, 0.0]),
        };
        let m = exact_moments(&spec).unwrap();
        assert_eq!(m.sigma_xy(), &array![0.0, 0.0]);
        assert!((m.m_yy() - 2.0).abs() < 1e-15);
        let theta = crate::linmodel::min_norm_blp(&m).unwrap();
        assert!(theta.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn eigen_coefficients_resolve() {
        let cov = build_covariance(&four_dim()).unwrap();
        let c = Coefficients::Eigen {
            scores: vec![2.0],
            tail: vec![0.0, 3.0],
        };
        let v = c.resolve(&cov).unwrap();
        // 2 / sqrt(8) on v1, 3 on v3
        assert!((v[0] - 2.0 / 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(v[1], 0.0);
        assert_eq!(v[2], 3.0);
        let bad = Coefficients::Eigen {
            scores: vec![1.0, 1.0],
            tail: vec![],
        };
        assert!(bad.resolve(&cov).is_err());
    }

    #[test]
    fn small_ball_limits() {
        let spec = four_dim();
        assert_eq!(probe_small_ball(&spec, 0.0, 4, 1000).unwrap(), 1.0);
        assert!(probe_small_ball(&spec, 10.0, 4, 1000).unwrap() < 1e-3);
        assert!(probe_small_ball(&spec, -1.0, 4, 1000).is_err());
        assert!(matches!(
            probe_small_ball(&spec, 0.5, 0, 1000),
            Err(PcrError::DegenerateDirections)
        ));
    }
}
