//! Concentration events behind the excess-risk bound, evaluated on one sample.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dgp::Sample;
use crate::error::Result;
use crate::estimator::{PCRFit, RotationPair};
use crate::linmodel::spectral::{spectral_norm, symmetric_eig, symmetric_spectral_norm};
use crate::linmodel::PopulationPCA;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `lambda_hat_K >= lambda_K / 2`
    pub eigenvalue_event: bool,
    /// `||Sigma_hat - Sigma||_2`
    pub covariance_deviation: f64,
    /// `||Sigma_hat - Sigma||_2 <= lambda_K / 2`
    pub covariance_event: bool,
    /// `||(1/T) sum P_t P_t' - I_K||_2`
    pub score_gram_deviation: f64,
    /// `lambda_min((1/T) sum P_t P_t')`
    pub score_gram_min: f64,
    /// `lambda_min(...) > 1/2`
    pub score_gram_event: bool,
    /// `||(1/T) sum P_t u_t'||_2`
    pub cross_moment_norm: f64,
    /// `||H H' - I_K||_2`
    pub rotation_deviation: f64,
    /// `T^{-1/2} ||P_hat - P H'||_2`
    pub score_deviation: f64,
    /// `||(1/T) sum u_t u_t' - E[u_t u_t']||_2`
    pub idiosyncratic_deviation: f64,
}

pub fn concentration_diagnostics(
    sample: &Sample,
    fit: &PCRFit,
    pca: &PopulationPCA,
    rot: &RotationPair,
) -> Result<Diagnostics> {
    let k = pca.k();
    let t = sample.t() as f64;
    let lambda_k = pca.lambda_k[k - 1];
    let lambda_hat_k = fit.eigvals_hat[k - 1];

    let sigma_hat = sample.x.t().dot(&sample.x) / t;
    let sigma = population_sigma(pca);
    let covariance_deviation = symmetric_spectral_norm((&sigma_hat - &sigma).view())?;

    let scores = &rot.scores;
    let gram = scores.t().dot(scores) / t;
    let score_gram_deviation = symmetric_spectral_norm((&gram - &Array2::<f64>::eye(k)).view())?;
    let score_gram_min = symmetric_eig(gram.view())?.values[k - 1];

    // (1/T) P' U = (1/T) P' X V_R V_R'; V_R has orthonormal columns
    let cross = scores.t().dot(&sample.x).dot(&pca.v_r) / t;
    let cross_moment_norm = spectral_norm(cross.view())?;

    let hh = rot.h.dot(&rot.h.t());
    let rotation_deviation = symmetric_spectral_norm((&hh - &Array2::<f64>::eye(k)).view())?;

    let diff = &fit.p_hat - &scores.dot(&rot.h.t());
    let score_deviation = spectral_norm(diff.view())? / t.sqrt();

    let mut idio = pca.v_r.t().dot(&sigma_hat).dot(&pca.v_r);
    for (i, l) in pca.lambda_r.iter().enumerate() {
        idio[[i, i]] -= l;
    }
    let idiosyncratic_deviation = symmetric_spectral_norm(idio.view())?;

    Ok(Diagnostics {
        eigenvalue_event: lambda_hat_k >= lambda_k / 2.0,
        covariance_deviation,
        covariance_event: covariance_deviation <= lambda_k / 2.0,
        score_gram_deviation,
        score_gram_min,
        score_gram_event: score_gram_min > 0.5,
        cross_moment_norm,
        rotation_deviation,
        score_deviation,
        idiosyncratic_deviation,
    })
}

fn population_sigma(pca: &PopulationPCA) -> Array2<f64> {
    let spike = &pca.v_k * &pca.lambda_k.view().insert_axis(Axis(0));
    let tail = &pca.v_r * &pca.lambda_r.view().insert_axis(Axis(0));
    spike.dot(&pca.v_k.t()) + tail.dot(&pca.v_r.t())
}
