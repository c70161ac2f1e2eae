//! Principal component regression on spiked-covariance data.
//!
//! The crate covers the population side (`linmodel`), a Gaussian VAR(1)
//! generator (`dgp`), the PCR estimator and its rotation to population scores
//! (`estimator`), an exact four-term decomposition of the excess risk (`risk`)
//! and a Monte Carlo harness for rate checks (`harness`).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dgp;
pub mod error;
pub mod estimator;
pub mod format;
pub mod harness;
pub mod linmodel;
pub mod risk;
pub mod rng;

pub use dgp::{exact_moments, simulate, Coefficients, DgpSpec, EigvecStyle, Link, Sample, Simulator};
pub use error::{PcrError, Result};
pub use estimator::{constrained_erm_fit, pcr_fit, rotation_and_infeasible, PCRFit, RotationPair};
pub use harness::{run_sweep, CellResult, SweepConfig};
pub use linmodel::{build_population_pca, min_norm_blp, CovarianceModel, JointMoments, PopulationPCA};
pub use risk::{decompose_excess_risk, RiskDecomposition};
