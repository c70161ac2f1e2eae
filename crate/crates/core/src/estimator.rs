//! Principal component regression.
//!
//! Two formulations are provided and kept independent after the shared
//! spectral step: the two-step score regression ([`pcr_fit`]) and least
//! squares constrained to the leading sample eigenspace
//! ([`constrained_erm_fit`]). Their predictions coincide.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dgp::Sample;
use crate::error::{PcrError, Result};
use crate::linmodel::spectral::{self, fix_signs, leading_eigenpairs, SubspaceOptions};
use crate::linmodel::{symmetric_eig, PopulationPCA, PINV_CUTOFF};

/// Relative eigenvalue floor below which `K` exceeds the numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Smallest eigenvalue of the population-score Gram matrix below which the
/// infeasible estimator falls back to a pseudoinverse.
pub const SCORE_GRAM_FLOOR: f64 = 1e-10;

/// Problems with `min(T, p)` above this size use subspace iteration by default.
pub const DENSE_LIMIT: usize = 400;

/// How the leading sample eigenpairs are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    /// Dense below [`DENSE_LIMIT`], subspace iteration above.
    #[default]
    Auto,
    Dense,
    Iterative,
}

/// Leading eigenpairs of `X'X / T`.
#[derive(Debug, Clone)]
pub struct SampleSpectrum {
    /// Leading eigenvalues, non-increasing. All `p` of them on the dense
    /// path; the block's Ritz values on the iterative path.
    pub eigvals: Array1<f64>,
    /// `p x K` leading eigenvectors.
    pub v_k: Array2<f64>,
}

impl SampleSpectrum {
    pub fn lambda_k(&self) -> Array1<f64> {
        self.eigvals.slice(s![..self.v_k.ncols()]).to_owned()
    }
}

fn check_k(x: ArrayView2<f64>, k: usize) -> Result<()> {
    let max = x.nrows().min(x.ncols());
    if k == 0 || k > max {
        return Err(PcrError::ComponentCount { k, max });
    }
    Ok(())
}

/// Leading `k` eigenpairs of the sample second-moment matrix of `x`.
pub fn sample_spectrum(x: ArrayView2<f64>, k: usize, method: SpectralMethod) -> Result<SampleSpectrum> {
    check_k(x, k)?;
    let (t, p) = x.dim();
    let n = t.min(p);
    let block = n.min(2 * k + 10);
    let use_iterative = match method {
        SpectralMethod::Dense => false,
        SpectralMethod::Iterative => block < n,
        SpectralMethod::Auto => n > DENSE_LIMIT && block < n,
    };
    let spectrum = if use_iterative {
        match iterative_spectrum(x, k, block)? {
            Some(s) => s,
            None => dense_spectrum(x, k)?,
        }
    } else {
        dense_spectrum(x, k)?
    };
    let lam_k = spectrum.eigvals[k - 1];
    let threshold = RANK_TOLERANCE * spectrum.eigvals[0].max(0.0);
    if !(lam_k > threshold) {
        return Err(PcrError::RankDeficient {
            k,
            value: lam_k,
            threshold,
        });
    }
    Ok(spectrum)
}

/// Maps leading eigenvectors `u` of `XX'/T` to those of `X'X/T`.
fn dual_to_primal(x: ArrayView2<f64>, u: ArrayView2<f64>, values: &Array1<f64>) -> Array2<f64> {
    let t = x.nrows() as f64;
    let mut v = x.t().dot(&u);
    for (mut col, &mu) in v.axis_iter_mut(Axis(1)).zip(values.iter()) {
        if mu > 0.0 {
            col /= (t * mu).sqrt();
        }
    }
    fix_signs(&mut v);
    v
}

fn dense_spectrum(x: ArrayView2<f64>, k: usize) -> Result<SampleSpectrum> {
    let (t, p) = x.dim();
    if p <= t {
        let sigma_hat = x.t().dot(&x) / t as f64;
        let eig = symmetric_eig(sigma_hat.view())?;
        Ok(SampleSpectrum {
            v_k: eig.vectors.slice(s![.., ..k]).to_owned(),
            eigvals: eig.values,
        })
    } else {
        let gram = x.dot(&x.t()) / t as f64;
        let eig = symmetric_eig(gram.view())?;
        let lead = eig.values.slice(s![..k]).to_owned();
        let v_k = dual_to_primal(x, eig.vectors.slice(s![.., ..k]), &lead);
        let mut eigvals = Array1::zeros(p);
        eigvals.slice_mut(s![..t]).assign(&eig.values);
        Ok(SampleSpectrum { eigvals, v_k })
    }
}

fn iterative_spectrum(x: ArrayView2<f64>, k: usize, block: usize) -> Result<Option<SampleSpectrum>> {
    let (t, p) = x.dim();
    let opts = SubspaceOptions {
        block,
        tolerance: 1e-11,
        max_iter: 300,
    };
    let tf = t as f64;
    if p <= t {
        let found = leading_eigenpairs(|q| x.t().dot(&x.dot(q)) / tf, p, k, opts)?;
        Ok(found.map(|f| SampleSpectrum {
            eigvals: f.ritz_values,
            v_k: f.vectors,
        }))
    } else {
        let found = leading_eigenpairs(|q| x.dot(&x.t().dot(q)) / tf, t, k, opts)?;
        Ok(found.map(|f| {
            let lead = f.ritz_values.slice(s![..k]).to_owned();
            SampleSpectrum {
                v_k: dual_to_primal(x, f.vectors.view(), &lead),
                eigvals: f.ritz_values,
            }
        }))
    }
}

/// Result of the two-step PCR estimator.
#[derive(Debug, Clone)]
pub struct PCRFit {
    pub k: usize,
    /// Leading eigenvalues of `X'X/T` (see [`SampleSpectrum::eigvals`]).
    pub eigvals_hat: Array1<f64>,
    pub v_hat_k: Array2<f64>,
    /// Estimated scores `X V_K Lambda_K^{-1/2}`, `T x K`.
    pub p_hat: Array2<f64>,
    /// `P' Y / T`.
    pub vartheta_hat: Array1<f64>,
    /// Coefficients in predictor space.
    pub theta_hat: Array1<f64>,
    /// Loadings `V_K Lambda_K^{1/2}`.
    pub b_hat: Array2<f64>,
}

impl PCRFit {
    pub fn lambda_hat_k(&self) -> Array1<f64> {
        self.eigvals_hat.slice(s![..self.k]).to_owned()
    }

    /// Orthonormal basis of the complement of the leading sample eigenspace.
    pub fn v_hat_r(&self) -> Result<Array2<f64>> {
        spectral::orthonormal_complement(self.v_hat_k.view())
    }

    /// `U = X - P B'`.
    pub fn residuals(&self, x: ArrayView2<f64>) -> Array2<f64> {
        &x - &self.p_hat.dot(&self.b_hat.t())
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.theta_hat)
    }

    /// `R_T(theta) = (1/T) sum (Y_t - theta' X_t)^2`.
    pub fn empirical_risk(&self, sample: &Sample) -> f64 {
        empirical_risk(sample, &self.theta_hat)
    }

    pub fn report(&self, sample: &Sample) -> FitReport {
        let shown = sample.p().min(2 * self.k + 10).min(self.eigvals_hat.len());
        FitReport {
            k: self.k,
            t: sample.t(),
            p: sample.p(),
            eigvals_hat: self.eigvals_hat.iter().take(shown).copied().collect(),
            vartheta_hat: self.vartheta_hat.to_vec(),
            theta_hat_norm: self.theta_hat.dot(&self.theta_hat).sqrt(),
            empirical_risk: self.empirical_risk(sample),
        }
    }
}

/// JSON summary of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub p: usize,
    pub eigvals_hat: Vec<f64>,
    pub vartheta_hat: Vec<f64>,
    pub theta_hat_norm: f64,
    pub empirical_risk: f64,
}

pub fn empirical_risk(sample: &Sample, theta: &Array1<f64>) -> f64 {
    let resid = &sample.y - &sample.x.dot(theta);
    resid.dot(&resid) / sample.t() as f64
}

pub fn pcr_fit(sample: &Sample, k: usize) -> Result<PCRFit> {
    pcr_fit_with(sample, k, SpectralMethod::Auto)
}

pub fn pcr_fit_with(sample: &Sample, k: usize, method: SpectralMethod) -> Result<PCRFit> {
    let spectrum = sample_spectrum(sample.x.view(), k, method)?;
    Ok(pcr_from_spectrum(sample, spectrum))
}

/// Second PCR step on a precomputed spectrum.
pub fn pcr_from_spectrum(sample: &Sample, spectrum: SampleSpectrum) -> PCRFit {
    let k = spectrum.v_k.ncols();
    let t = sample.t() as f64;
    let lam = spectrum.lambda_k();
    let inv_roots = lam.mapv(|l| 1.0 / l.sqrt());
    let p_hat = sample.x.dot(&spectrum.v_k) * inv_roots.view().insert_axis(Axis(0));
    let vartheta_hat = p_hat.t().dot(&sample.y) / t;
    let theta_hat = spectrum.v_k.dot(&(&vartheta_hat * &inv_roots));
    let b_hat = &spectrum.v_k * &lam.mapv(f64::sqrt).view().insert_axis(Axis(0));
    PCRFit {
        k,
        eigvals_hat: spectrum.eigvals,
        v_hat_k: spectrum.v_k,
        p_hat,
        vartheta_hat,
        theta_hat,
        b_hat,
    }
}

/// Least squares subject to `V_R' theta = 0`, solved on the reduced
/// coordinates `theta = V_K a` through the normal equations.
pub fn constrained_erm_fit(sample: &Sample, k: usize) -> Result<Array1<f64>> {
    let spectrum = sample_spectrum(sample.x.view(), k, SpectralMethod::Auto)?;
    Ok(constrained_erm_from_spectrum(sample, &spectrum))
}

pub fn constrained_erm_from_spectrum(sample: &Sample, spectrum: &SampleSpectrum) -> Array1<f64> {
    let t = sample.t() as f64;
    let z = sample.x.dot(&spectrum.v_k);
    let gram = z.t().dot(&z) / t;
    let rhs = z.t().dot(&sample.y) / t;
    let eig = symmetric_eig(gram.view()).expect("Gram matrix is symmetric");
    let (a, _) = spectral::psd_pseudo_solve(&eig, &rhs, PINV_CUTOFF);
    spectrum.v_k.dot(&a)
}

/// Approximate rotation `H` and the infeasible estimator on population scores.
#[derive(Debug, Clone)]
pub struct RotationPair {
    /// `Lambda_hat_K^{-1/2} V_hat_K' V_K Lambda_K^{1/2}`.
    pub h: Array2<f64>,
    pub vartheta_tilde: Array1<f64>,
    /// Population scores `P = X V_K Lambda_K^{-1/2}`, `T x K`.
    pub scores: Array2<f64>,
    /// Smallest eigenvalue of `P'P / T`.
    pub score_gram_min: f64,
    /// Set when the pseudoinverse fallback was needed for `vartheta_tilde`.
    pub degenerate: bool,
    /// Smallest singular value of `H` above `1e-12` times the largest.
    pub h_invertible: bool,
}

pub fn rotation_matrix(
    v_hat_k: ArrayView2<f64>,
    lambda_hat_k: &Array1<f64>,
    v_k: ArrayView2<f64>,
    lambda_k: &Array1<f64>,
) -> Array2<f64> {
    let mut h = v_hat_k.t().dot(&v_k);
    for ((i, j), v) in h.indexed_iter_mut() {
        *v *= lambda_k[j].sqrt() / lambda_hat_k[i].sqrt();
    }
    h
}

pub fn rotation_and_infeasible(fit: &PCRFit, pca: &PopulationPCA, sample: &Sample) -> Result<RotationPair> {
    if fit.k != pca.k() || fit.v_hat_k.nrows() != pca.p() || sample.p() != pca.p() {
        return Err(PcrError::Dimension(format!(
            "fit (K={}, p={}) and population PCA (K={}, p={}) disagree",
            fit.k,
            fit.v_hat_k.nrows(),
            pca.k(),
            pca.p()
        )));
    }
    let h = rotation_matrix(fit.v_hat_k.view(), &fit.lambda_hat_k(), pca.v_k.view(), &pca.lambda_k);
    let sv = symmetric_eig(h.t().dot(&h).view())?.values.mapv(|v| v.max(0.0).sqrt());
    let h_invertible = sv[sv.len() - 1] > 1e-12 * sv[0];

    let t = sample.t() as f64;
    let scores = pca.scores(sample.x.view());
    let gram = scores.t().dot(&scores) / t;
    let rhs = scores.t().dot(&sample.y) / t;
    let eig = symmetric_eig(gram.view())?;
    let score_gram_min = eig.values[eig.values.len() - 1];
    let degenerate = score_gram_min < SCORE_GRAM_FLOOR;
    let cutoff = if degenerate { PINV_CUTOFF } else { 0.0 };
    let (vartheta_tilde, _) = spectral::psd_pseudo_solve(&eig, &rhs, cutoff);
    Ok(RotationPair {
        h,
        vartheta_tilde,
        scores,
        score_gram_min,
        degenerate,
        h_invertible,
    })
}
