//! Plot-ready CSV, the JSON summary and `--check` verdicts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{fit_rate, CellResult, RateFit, Response};
use crate::error::Result;
use crate::format::fmt17;
use crate::risk::{decomposition_csv_row, DECOMPOSITION_CSV_HEADER};

/// One row per cell.
pub const CELL_CSV_HEADER: [&str; 22] = [
    "T",
    "p",
    "K",
    "replications",
    "failures",
    "degenerate",
    "bound_violations",
    "mean_excess",
    "median_excess",
    "se_excess",
    "mean_residual",
    "median_residual",
    "se_residual",
    "mean_term_pc_estimation",
    "mean_term_rotation_gap",
    "mean_term_ls_gap",
    "mean_term_approx",
    "approximation_error",
    "rate_expression",
    "eigenvalue_event_freq",
    "score_gram_event_freq",
    "median_rotation_deviation",
];

fn opt(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

pub fn write_cells_csv<W: Write>(cells: &[CellResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CELL_CSV_HEADER)?;
    for c in cells {
        let d = c.diagnostics.as_ref();
        w.write_record([
            c.cell.t.to_string(),
            c.cell.p.to_string(),
            c.cell.k.to_string(),
            c.replications.to_string(),
            c.failures.to_string(),
            c.degenerate.to_string(),
            c.bound_violations.to_string(),
            fmt17(c.mean_excess),
            fmt17(c.median_excess),
            fmt17(c.se_excess),
            fmt17(c.mean_residual),
            fmt17(c.median_residual),
            fmt17(c.se_residual),
            fmt17(c.mean_term_pc_estimation),
            fmt17(c.mean_term_rotation_gap),
            fmt17(c.mean_term_ls_gap),
            fmt17(c.mean_term_approx),
            fmt17(c.approximation_error),
            fmt17(c.rate_expression),
            opt(d.map(|d| d.eigenvalue_event_freq)),
            opt(d.map(|d| d.score_gram_event_freq)),
            opt(d.map(|d| d.median_rotation_deviation)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per successful replication, in cell then replication order.
pub fn write_replications_csv<W: Write>(cells: &[CellResult], alpha: f64, rho: f64, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DECOMPOSITION_CSV_HEADER)?;
    for c in cells {
        for r in &c.records {
            if let Some(d) = &r.decomposition {
                w.write_record(decomposition_csv_row(
                    d, c.cell.t, c.cell.p, c.cell.k, alpha, rho, r.seed,
                ))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Acceptance band on a fitted log-log slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheck {
    pub response: Response,
    pub slope_min: f64,
    pub slope_max: f64,
    pub r_squared_min: f64,
}

/// Limits on per-replication bound failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub max_violations: usize,
    pub max_degenerate_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub note: String,
    pub seed: u64,
    pub replications: usize,
    pub cells: usize,
    pub failures: usize,
    pub degenerate: usize,
    pub bound_violations: usize,
    pub slopes: Vec<(Response, Option<RateFit>)>,
    pub check: Option<CheckOutcome>,
}

const BAND_NOTE: &str = "slope and bound bands are engineering choices for desk-scale Monte Carlo; \
    the rate constant is not computable";

impl SweepSummary {
    pub fn new(cells: &[CellResult], seed: u64, replications: usize) -> Self {
        let slopes = [
            Response::MeanExcess,
            Response::MedianExcess,
            Response::MeanResidual,
            Response::ExcessOverFloor,
            Response::RateExpression,
        ]
        .into_iter()
        .map(|r| (r, fit_rate(cells, r).ok()))
        .collect();
        Self {
            note: BAND_NOTE.to_string(),
            seed,
            replications,
            cells: cells.len(),
            failures: cells.iter().map(|c| c.failures).sum(),
            degenerate: cells.iter().map(|c| c.degenerate).sum(),
            bound_violations: cells.iter().map(|c| c.bound_violations).sum(),
            slopes,
            check: None,
        }
    }

    /// Evaluates the bands and stores the verdict.
    pub fn check(
        &mut self,
        cells: &[CellResult],
        slope: Option<SlopeCheck>,
        bound: Option<BoundCheck>,
    ) -> &CheckOutcome {
        let mut messages = Vec::new();
        let mut passed = true;
        if let Some(s) = slope {
            match fit_rate(cells, s.response) {
                Ok(fit) => {
                    let ok = fit.slope >= s.slope_min && fit.slope <= s.slope_max && fit.r_squared >= s.r_squared_min;
                    passed &= ok;
                    messages.push(format!(
                        "{} slope {:.4} in [{}, {}], R^2 {:.4} >= {}: {}",
                        s.response.name(),
                        fit.slope,
                        s.slope_min,
                        s.slope_max,
                        fit.r_squared,
                        s.r_squared_min,
                        if ok { "ok" } else { "VIOLATED" }
                    ));
                }
                Err(e) => {
                    passed = false;
                    messages.push(format!("{} slope unavailable: {e}", s.response.name()));
                }
            }
        }
        if let Some(b) = bound {
            let reps: usize = cells.iter().map(|c| c.usable()).sum();
            let fraction = if reps == 0 {
                1.0
            } else {
                self.degenerate as f64 / reps as f64
            };
            let ok = self.bound_violations <= b.max_violations && fraction <= b.max_degenerate_fraction;
            passed &= ok;
            messages.push(format!(
                "bound violations {} (max {}), degenerate fraction {:.4} (max {}): {}",
                self.bound_violations,
                b.max_violations,
                fraction,
                b.max_degenerate_fraction,
                if ok { "ok" } else { "VIOLATED" }
            ));
        }
        let flagged: Vec<String> = cells
            .iter()
            .filter(|c| c.flagged)
            .map(|c| format!("T={} p={} K={}", c.cell.t, c.cell.p, c.cell.k))
            .collect();
        if !flagged.is_empty() {
            passed = false;
            messages.push(format!(
                "cells with more than 10% failed replications: {}",
                flagged.join(", ")
            ));
        }
        self.check = Some(CheckOutcome { passed, messages });
        self.check.as_ref().unwrap()
    }
}
