//! Monte Carlo replication engine.
//!
//! A sweep walks a grid of `(T, p, K)` cells. Each cell fixes the population
//! (covariance, moments, `theta*`) once, then runs independent replications
//! of simulate -> fit -> rotate -> decompose. Every replication draws from its
//! own stream keyed by `(seed, cell, replication)`, so results do not depend
//! on the thread count.

mod diagnostics;
mod grid;
mod output;
mod rate;

pub use diagnostics::{concentration_diagnostics, Diagnostics};
pub use grid::{expand_grid, Cell, SizeRule};
pub use output::{
    write_cells_csv, write_replications_csv, BoundCheck, CheckOutcome, SlopeCheck, SweepSummary, CELL_CSV_HEADER,
};
pub use rate::{fit_log_log, fit_rate, RateFit, Response};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{DgpSpec, EigvecStyle, Link, Simulator};
use crate::error::{PcrError, Result};
use crate::estimator::{pcr_fit, rotation_and_infeasible};
use crate::linmodel::{build_population_pca, min_norm_blp, JointMoments, PopulationPCA};
use crate::risk::{approximation_error, decompose_excess_risk, rate_expression, RiskDecomposition};
use crate::rng::derive_seed;

/// Cell-independent part of a data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecTemplate {
    pub alpha: f64,
    /// Padded with its last entry (or truncated) to length `K`.
    pub spike_constants: Vec<f64>,
    /// Shared by all `p - K` trailing eigenvalues.
    pub tail_constant: f64,
    pub rho: f64,
    pub link: Link,
    pub noise_sd: f64,
    pub eigvec_style: EigvecStyle,
}

impl SpecTemplate {
    pub fn instantiate(&self, p: usize, k: usize, seed: u64) -> Result<DgpSpec> {
        let last = *self
            .spike_constants
            .last()
            .ok_or_else(|| PcrError::Config("spike_constants must not be empty".into()))?;
        let mut spikes: Vec<f64> = self.spike_constants.iter().copied().take(k).collect();
        spikes.resize(k, last);
        Ok(DgpSpec {
            p,
            k,
            alpha: self.alpha,
            spike_constants: spikes,
            tail_constants: vec![self.tail_constant; p.saturating_sub(k)],
            rho: self.rho,
            link: self.link.clone(),
            noise_sd: self.noise_sd,
            eigvec_style: self.eigvec_style,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub template: SpecTemplate,
    pub grid: Vec<Cell>,
    pub replications: usize,
    pub seed: u64,
    pub diagnostics: bool,
    /// Stand-in for the mixing exponent in the rate expression; `inf` for iid.
    pub r_alpha_proxy: f64,
    pub threads: usize,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(PcrError::Config("the grid is empty".into()));
        }
        if self.replications == 0 {
            return Err(PcrError::Config("replications must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(PcrError::Config("threads must be at least 1".into()));
        }
        if !(self.r_alpha_proxy > 0.0) {
            return Err(PcrError::Config("r_alpha_proxy must be positive".into()));
        }
        self.grid.iter().try_for_each(Cell::validate)
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub decomposition: Option<RiskDecomposition>,
    pub diagnostics: Option<Diagnostics>,
    pub error: Option<String>,
}

/// Frequencies of the concentration events and medians of the norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSummary {
    pub count: usize,
    pub eigenvalue_event_freq: f64,
    pub covariance_event_freq: f64,
    pub score_gram_event_freq: f64,
    pub median_covariance_deviation: f64,
    pub median_score_gram_deviation: f64,
    pub median_score_gram_min: f64,
    pub median_cross_moment_norm: f64,
    pub median_rotation_deviation: f64,
    pub median_score_deviation: f64,
    pub median_idiosyncratic_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub replications: usize,
    pub failures: usize,
    pub degenerate: usize,
    pub bound_violations: usize,
    pub mean_excess: f64,
    pub median_excess: f64,
    pub se_excess: f64,
    /// Excess minus the doubled approximation error.
    pub mean_residual: f64,
    pub median_residual: f64,
    pub se_residual: f64,
    pub mean_term_pc_estimation: f64,
    pub mean_term_rotation_gap: f64,
    pub mean_term_ls_gap: f64,
    pub mean_term_approx: f64,
    /// `theta*' V_R Lambda_R V_R' theta*` for the cell's population.
    pub approximation_error: f64,
    pub rate_expression: f64,
    /// More than 10% of replications failed.
    pub flagged: bool,
    pub diagnostics: Option<DiagnosticSummary>,
    pub records: Vec<ReplicationRecord>,
}

impl CellResult {
    pub fn usable(&self) -> usize {
        self.replications - self.failures
    }
}

/// Population objects shared by every replication of a cell.
pub struct CellPopulation {
    pub spec: DgpSpec,
    pub simulator: Simulator,
    pub moments: JointMoments,
    pub pca: PopulationPCA,
}

impl CellPopulation {
    pub fn new(template: &SpecTemplate, cell: Cell, seed: u64) -> Result<Self> {
        let spec = template.instantiate(cell.p, cell.k, seed)?;
        let simulator = Simulator::new(&spec)?;
        let moments = simulator.moments();
        let theta_star = min_norm_blp(&moments)?;
        let pca = build_population_pca(simulator.covariance(), &theta_star, cell.k)?;
        Ok(Self {
            spec,
            simulator,
            moments,
            pca,
        })
    }

    /// simulate -> fit -> rotate -> decompose (-> diagnostics) for one stream.
    pub fn replicate(
        &self,
        t: usize,
        seed: u64,
        with_diagnostics: bool,
    ) -> Result<(RiskDecomposition, Option<Diagnostics>)> {
        let sample = self.simulator.sample(t, seed)?;
        let fit = pcr_fit(&sample, self.spec.k)?;
        let rot = rotation_and_infeasible(&fit, &self.pca, &sample)?;
        let decomp = decompose_excess_risk(&fit, &rot, &self.pca, &self.moments, &sample)?;
        let diag = if with_diagnostics {
            Some(concentration_diagnostics(&sample, &fit, &self.pca, &rot)?)
        } else {
            None
        };
        Ok((decomp, diag))
    }
}

/// Stream seed for a replication of a cell.
pub fn replication_seed(seed: u64, cell_index: usize, replication: usize) -> u64 {
    derive_seed(seed, &[cell_index as u64, replication as u64])
}

pub fn run_sweep(config: &SweepConfig) -> Result<Vec<CellResult>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| PcrError::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| {
        config
            .grid
            .iter()
            .enumerate()
            .map(|(index, &cell)| run_cell(config, index, cell))
            .collect()
    })
}

fn run_cell(config: &SweepConfig, index: usize, cell: Cell) -> Result<CellResult> {
    let population = CellPopulation::new(&config.template, cell, config.seed)
        .map_err(|e| PcrError::Config(format!("cell {index} (T={}, p={}, K={}): {e}", cell.t, cell.p, cell.k)))?;
    let records: Vec<ReplicationRecord> = (0..config.replications)
        .into_par_iter()
        .map(|replication| {
            let seed = replication_seed(config.seed, index, replication);
            match population.replicate(cell.t, seed, config.diagnostics) {
                Ok((decomp, diag)) => ReplicationRecord {
                    replication,
                    seed,
                    decomposition: Some(decomp),
                    diagnostics: diag,
                    error: None,
                },
                Err(e) => ReplicationRecord {
                    replication,
                    seed,
                    decomposition: None,
                    diagnostics: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let approx = approximation_error(&population.pca);
    let rate = rate_expression(cell.t, cell.p, cell.k, config.template.alpha, config.r_alpha_proxy);
    Ok(aggregate(cell, records, approx, rate))
}

/// Sum in sorted order so the result does not depend on record order.
fn stable_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Standard error of the mean.
fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = stable_mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (stable_mean(&sq) * n as f64 / (n - 1) as f64 / n as f64).sqrt()
}

/// Aggregates replication records into a cell summary.
pub fn aggregate(cell: Cell, records: Vec<ReplicationRecord>, approx: f64, rate: f64) -> CellResult {
    let decomps: Vec<&RiskDecomposition> = records.iter().filter_map(|r| r.decomposition.as_ref()).collect();
    let failures = records.len() - decomps.len();
    let collect = |f: fn(&RiskDecomposition) -> f64| decomps.iter().map(|d| f(d)).collect::<Vec<f64>>();
    let excess = collect(|d| d.excess_risk_exact);
    let residual = collect(|d| d.estimation_part());
    let degenerate = decomps.iter().filter(|d| d.degenerate).count();
    let bound_violations = decomps.iter().filter(|d| d.bound_holds() == Some(false)).count();

    let diags: Vec<&Diagnostics> = records.iter().filter_map(|r| r.diagnostics.as_ref()).collect();
    let diagnostics = if diags.is_empty() {
        None
    } else {
        let n = diags.len() as f64;
        let freq = |f: fn(&Diagnostics) -> bool| diags.iter().filter(|d| f(d)).count() as f64 / n;
        let med = |f: fn(&Diagnostics) -> f64| median(&diags.iter().map(|d| f(d)).collect::<Vec<_>>());
        Some(DiagnosticSummary {
            count: diags.len(),
            eigenvalue_event_freq: freq(|d| d.eigenvalue_event),
            covariance_event_freq: freq(|d| d.covariance_event),
            score_gram_event_freq: freq(|d| d.score_gram_event),
            median_covariance_deviation: med(|d| d.covariance_deviation),
            median_score_gram_deviation: med(|d| d.score_gram_deviation),
            median_score_gram_min: med(|d| d.score_gram_min),
            median_cross_moment_norm: med(|d| d.cross_moment_norm),
            median_rotation_deviation: med(|d| d.rotation_deviation),
            median_score_deviation: med(|d| d.score_deviation),
            median_idiosyncratic_deviation: med(|d| d.idiosyncratic_deviation),
        })
    };

    CellResult {
        cell,
        replications: records.len(),
        failures,
        degenerate,
        bound_violations,
        mean_excess: stable_mean(&excess),
        median_excess: median(&excess),
        se_excess: standard_error(&excess),
        mean_residual: stable_mean(&residual),
        median_residual: median(&residual),
        se_residual: standard_error(&residual),
        mean_term_pc_estimation: stable_mean(&collect(|d| d.term_pc_estimation)),
        mean_term_rotation_gap: stable_mean(&collect(|d| d.term_rotation_gap)),
        mean_term_ls_gap: stable_mean(&collect(|d| d.term_ls_gap)),
        mean_term_approx: stable_mean(&collect(|d| d.term_approx)),
        approximation_error: approx,
        rate_expression: rate,
        flagged: failures * 10 > records.len(),
        diagnostics,
        records,
    }
}
