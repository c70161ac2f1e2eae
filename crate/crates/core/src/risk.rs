//! Population risk under known moments and the four-term bound on the
//! excess risk of PCR.
//!
//! All expectations are taken with respect to a fresh draw of `(Y_t, X_t)`
//! independent of the training sample, so with exact Gaussian moments every
//! quantity here is computed in closed form.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::dgp::Sample;
use crate::error::{PcrError, Result};
use crate::estimator::{PCRFit, RotationPair};
use crate::format::fmt17;
use crate::linmodel::{JointMoments, PopulationPCA};

/// `R(theta) = E[Y^2] - 2 theta' E[XY] + theta' Sigma theta`.
pub fn population_risk(theta: &Array1<f64>, moments: &JointMoments) -> Result<f64> {
    if theta.len() != moments.p() {
        return Err(PcrError::Dimension(format!(
            "theta has length {}, moments have p = {}",
            theta.len(),
            moments.p()
        )));
    }
    let quad = theta.dot(&moments.sigma().dot(theta));
    Ok(moments.m_yy() - 2.0 * theta.dot(moments.sigma_xy()) + quad)
}

/// `theta*' V_R Lambda_R V_R' theta*`: the risk lost by predicting from the
/// population scores alone.
pub fn approximation_error(pca: &PopulationPCA) -> f64 {
    let via_theta = tail_quadratic(pca, &pca.theta_star);
    let via_gamma = tail_quadratic(pca, &pca.gamma_star);
    debug_assert!(
        (via_theta - via_gamma).abs() <= 1e-10 * (1.0 + via_theta.abs()),
        "approximation error forms disagree: {via_theta} vs {via_gamma}"
    );
    via_theta
}

fn tail_quadratic(pca: &PopulationPCA, v: &Array1<f64>) -> f64 {
    let coords = pca.v_r.t().dot(v);
    coords.iter().zip(pca.lambda_r.iter()).map(|(c, l)| c * c * l).sum()
}

/// `E(||P_hat_t - H P_t||^2 | D) = tr(M Sigma M')` with
/// `M = Lambda_hat_K^{-1/2} V_hat_K' V_R V_R'`.
pub fn conditional_score_error(fit: &PCRFit, pca: &PopulationPCA) -> f64 {
    // V_R' V_hat_K, (p - K) x K
    let cross = pca.v_r.t().dot(&fit.v_hat_k);
    let lam_hat = fit.lambda_hat_k();
    cross
        .rows()
        .into_iter()
        .zip(pca.lambda_r.iter())
        .map(|(row, &l)| l * row.iter().zip(lam_hat.iter()).map(|(c, lh)| c * c / lh).sum::<f64>())
        .sum()
}

/// The four bounding terms, the exact excess risk and the bound verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskDecomposition {
    /// `2 max_s Y_s^2 E(||P_hat_t - H P_t||^2 | D)`
    pub term_pc_estimation: f64,
    /// `4 ||vartheta_tilde - H' vartheta_hat||^2`
    pub term_rotation_gap: f64,
    /// `4 ||vartheta* - vartheta_tilde||^2`
    pub term_ls_gap: f64,
    /// `2 ||u_t' gamma*||^2_{L2}`
    pub term_approx: f64,
    /// `R(theta_hat) - R(theta*)`
    pub excess_risk_exact: f64,
    /// Sum of the four terms minus the excess risk.
    pub bound_slack: f64,
    /// `vartheta_tilde` needed the pseudoinverse fallback.
    pub degenerate: bool,
}

impl RiskDecomposition {
    pub fn term_sum(&self) -> f64 {
        self.term_pc_estimation + self.term_rotation_gap + self.term_ls_gap + self.term_approx
    }

    /// `1 + |excess| + term sum`.
    pub fn scale(&self) -> f64 {
        1.0 + self.excess_risk_exact.abs() + self.term_sum()
    }

    /// Whether `excess <= term sum` up to `1e-8 * scale`. `None` when degenerate.
    pub fn bound_holds(&self) -> Option<bool> {
        if self.degenerate {
            None
        } else {
            Some(self.bound_slack >= -1e-8 * self.scale())
        }
    }

    /// Excess risk net of the doubled approximation error.
    pub fn estimation_part(&self) -> f64 {
        self.excess_risk_exact - self.term_approx
    }
}

pub fn decompose_excess_risk(
    fit: &PCRFit,
    rot: &RotationPair,
    pca: &PopulationPCA,
    moments: &JointMoments,
    sample: &Sample,
) -> Result<RiskDecomposition> {
    if moments.p() != pca.p() || sample.p() != pca.p() {
        return Err(PcrError::Dimension("decomposition inputs disagree on p".into()));
    }
    let y_max_sq = sample.y.iter().fold(0.0_f64, |m, v| m.max(v * v));
    let term_pc_estimation = 2.0 * y_max_sq * conditional_score_error(fit, pca);
    let rotated = rot.h.t().dot(&fit.vartheta_hat);
    let gap = &rot.vartheta_tilde - &rotated;
    let term_rotation_gap = 4.0 * gap.dot(&gap);
    let ls = &pca.vartheta_star - &rot.vartheta_tilde;
    let term_ls_gap = 4.0 * ls.dot(&ls);
    let term_approx = 2.0 * approximation_error(pca);
    let excess_risk_exact = population_risk(&fit.theta_hat, moments)? - population_risk(&pca.theta_star, moments)?;
    let sum = term_pc_estimation + term_rotation_gap + term_ls_gap + term_approx;
    Ok(RiskDecomposition {
        term_pc_estimation,
        term_rotation_gap,
        term_ls_gap,
        term_approx,
        excess_risk_exact,
        bound_slack: sum - excess_risk_exact,
        degenerate: rot.degenerate,
    })
}

/// Empirical estimation error next to the constant-free rate expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    /// `excess - 2 * approximation error`.
    pub residual: f64,
    /// `p^{1-2 alpha} + (p / (T p^alpha))^2 p^{2/r} + K/T`.
    pub rate: f64,
}

/// Rate expression without its unknown constant and log factor.
pub fn rate_expression(t: usize, p: usize, k: usize, alpha: f64, r_alpha: f64) -> f64 {
    let (t, p, k) = (t as f64, p as f64, k as f64);
    let dependence = if r_alpha.is_infinite() {
        1.0
    } else {
        p.powf(2.0 / r_alpha)
    };
    let ratio = p / (t * p.powf(alpha));
    p.powf(1.0 - 2.0 * alpha) + ratio * ratio * dependence + k / t
}

pub fn residual_rate_inputs(
    decomp: &RiskDecomposition,
    t: usize,
    p: usize,
    k: usize,
    alpha: f64,
    r_alpha_proxy: f64,
) -> Result<RateInputs> {
    if decomp.degenerate {
        return Err(PcrError::InvalidSpec(
            "rate inputs need a non-degenerate decomposition".into(),
        ));
    }
    Ok(RateInputs {
        residual: decomp.estimation_part(),
        rate: rate_expression(t, p, k, alpha, r_alpha_proxy),
    })
}

/// Column names of [`decomposition_csv_row`].
pub const DECOMPOSITION_CSV_HEADER: [&str; 13] = [
    "T",
    "p",
    "K",
    "alpha",
    "rho",
    "seed",
    "term_pc_estimation",
    "term_rotation_gap",
    "term_ls_gap",
    "term_approx",
    "excess_risk",
    "bound_slack",
    "degenerate",
];

/// One CSV row describing a decomposition and the replication it came from.
pub fn decomposition_csv_row(
    decomp: &RiskDecomposition,
    t: usize,
    p: usize,
    k: usize,
    alpha: f64,
    rho: f64,
    seed: u64,
) -> Vec<String> {
    vec![
        t.to_string(),
        p.to_string(),
        k.to_string(),
        fmt17(alpha),
        fmt17(rho),
        seed.to_string(),
        fmt17(decomp.term_pc_estimation),
        fmt17(decomp.term_rotation_gap),
        fmt17(decomp.term_ls_gap),
        fmt17(decomp.term_approx),
        fmt17(decomp.excess_risk_exact),
        fmt17(decomp.bound_slack),
        u8::from(decomp.degenerate).to_string(),
    ]
}
