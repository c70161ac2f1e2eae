//! Log-log regression of a cell statistic on the sample size.

use serde::{Deserialize, Serialize};

use super::CellResult;
use crate::error::{PcrError, Result};

/// Cell statistic used as the regression response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    MeanExcess,
    MedianExcess,
    /// Mean of excess minus the doubled approximation error.
    MeanResidual,
    MedianResidual,
    /// Mean excess minus the (undoubled) approximation error.
    ExcessOverFloor,
    RateExpression,
}

impl Response {
    pub fn select(&self, cell: &CellResult) -> f64 {
        match self {
            Response::MeanExcess => cell.mean_excess,
            Response::MedianExcess => cell.median_excess,
            Response::MeanResidual => cell.mean_residual,
            Response::MedianResidual => cell.median_residual,
            Response::ExcessOverFloor => cell.mean_excess - cell.approximation_error,
            Response::RateExpression => cell.rate_expression,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Response::MeanExcess => "mean_excess",
            Response::MedianExcess => "median_excess",
            Response::MeanResidual => "mean_residual",
            Response::MedianResidual => "median_residual",
            Response::ExcessOverFloor => "excess_over_floor",
            Response::RateExpression => "rate_expression",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub used: usize,
    /// Cells dropped for a non-positive or non-finite response.
    pub excluded: usize,
}

pub fn fit_rate(cells: &[CellResult], response: Response) -> Result<RateFit> {
    let ts: Vec<f64> = cells.iter().map(|c| c.cell.t as f64).collect();
    let ys: Vec<f64> = cells.iter().map(|c| response.select(c)).collect();
    fit_log_log(&ts, &ys)
}

/// OLS of `ln y` on `ln t`, skipping pairs with `y <= 0`.
pub fn fit_log_log(ts: &[f64], ys: &[f64]) -> Result<RateFit> {
    if ts.len() != ys.len() {
        return Err(PcrError::Dimension(format!(
            "{} sizes but {} responses",
            ts.len(),
            ys.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(t, y)| **t > 0.0 && y.is_finite() && **y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    let used = pairs.len();
    if used < 3 {
        return Err(PcrError::InsufficientData {
            usable: used,
            needed: 3,
        });
    }
    let n = used as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(PcrError::InsufficientData { usable: 1, needed: 3 });
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        used,
        excluded: ts.len() - used,
    })
}
