//! Run configuration: a flat TOML document, optionally overridden by
//! `PCRLAB_<KEY>` environment variables.
//!
//! ```toml
//! T = [200, 400, 800]
//! p_rule = "p = T"
//! K_rule = "K = 1"
//! alpha = 1.0
//! vartheta = [1.0]
//! ```

use serde::{Deserialize, Serialize};

use crate::dgp::{Coefficients, DgpSpec, EigvecStyle, Link};
use crate::error::{PcrError, Result};
use crate::harness::Response;
use crate::harness::{expand_grid, BoundCheck, Cell, SizeRule, SlopeCheck, SpecTemplate, SweepConfig};

pub const ENV_PREFIX: &str = "PCRLAB_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Linear,
    Quadratic,
}

/// What `--check` enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    None,
    Slope,
    Bound,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<usize> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(rename = "T")]
    pub t: OneOrMany,
    pub p_rule: SizeRule,
    #[serde(rename = "K_rule")]
    pub k_rule: SizeRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max: Option<usize>,
    pub alpha: f64,
    pub rho: f64,
    pub spike_constants: Vec<f64>,
    pub tail_constant: f64,
    pub link: LinkKind,
    pub vartheta: Vec<f64>,
    pub gamma_tail: Vec<f64>,
    pub quad_coefficient: f64,
    pub quad_direction: Vec<f64>,
    pub noise_sd: f64,
    pub eigvec_style: EigvecStyle,
    pub replications: usize,
    pub seed: u64,
    pub r_alpha_proxy: f64,
    pub threads: usize,
    pub diagnostics: bool,
    pub check: CheckMode,
    pub check_response: Response,
    pub slope_min: f64,
    pub slope_max: f64,
    pub r_squared_min: f64,
    pub max_violations: usize,
    pub max_degenerate_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t: OneOrMany::Many(vec![200, 400, 800, 1600, 3200]),
            p_rule: "p = T".parse().expect("valid rule"),
            k_rule: SizeRule::constant(1),
            p_max: None,
            alpha: 1.0,
            rho: 0.0,
            spike_constants: vec![1.0],
            tail_constant: 1.0,
            link: LinkKind::Linear,
            vartheta: vec![1.0],
            gamma_tail: vec![],
            quad_coefficient: 0.0,
            quad_direction: vec![1.0],
            noise_sd: 1.0,
            eigvec_style: EigvecStyle::Identity,
            replications: 200,
            seed: 0,
            r_alpha_proxy: f64::INFINITY,
            threads: 1,
            diagnostics: false,
            check: CheckMode::None,
            check_response: Response::MeanResidual,
            slope_min: -1.35,
            slope_max: -0.65,
            r_squared_min: 0.9,
            max_violations: 0,
            max_degenerate_fraction: 0.02,
            out: None,
        }
    }
}

/// Every key with its default and meaning.
pub const KEYS: &[(&str, &str, &str)] = &[
    (
        "T",
        "[200, 400, 800, 1600, 3200]",
        "sample sizes; single-sample commands use the first",
    ),
    ("p_rule", "\"p = T\"", "dimension rule `p = C*T^r`"),
    ("K_rule", "\"K = 1\"", "component count rule `K = C*T^r`"),
    ("p_max", "unset", "cap on p"),
    ("alpha", "1.0", "spike exponent in (1/2, 1]"),
    ("rho", "0.0", "VAR(1) coefficient in [0, 1)"),
    (
        "spike_constants",
        "[1.0]",
        "c_1 >= ... >= c_K, last entry repeated up to K",
    ),
    ("tail_constant", "1.0", "trailing eigenvalue"),
    ("link", "\"linear\"", "`linear` or `quadratic`"),
    ("vartheta", "[1.0]", "coefficients on the population scores"),
    ("gamma_tail", "[]", "coefficients on trailing eigenvectors"),
    ("quad_coefficient", "0.0", "q in the quadratic link"),
    ("quad_direction", "[1.0]", "w in population-score coordinates"),
    ("noise_sd", "1.0", "standard deviation of the additive noise"),
    ("eigvec_style", "\"identity\"", "`identity` or `haar`"),
    ("replications", "200", "replications per cell"),
    ("seed", "0", "base seed"),
    (
        "r_alpha_proxy",
        "inf",
        "mixing exponent stand-in in the rate expression",
    ),
    ("threads", "1", "worker threads"),
    ("diagnostics", "false", "record concentration diagnostics"),
    ("check", "\"none\"", "`none`, `slope`, `bound` or `both`"),
    ("check_response", "\"mean_residual\"", "statistic regressed on T"),
    ("slope_min", "-1.35", "lower slope band"),
    ("slope_max", "-0.65", "upper slope band"),
    ("r_squared_min", "0.9", "minimum R^2 of the slope fit"),
    ("max_violations", "0", "allowed bound violations"),
    ("max_degenerate_fraction", "0.02", "allowed degenerate fraction"),
    ("out", "unset", "output path (or prefix for sweeps)"),
];

impl RunConfig {
    /// Parses `text`, then applies overrides from `env` (name, value) pairs.
    /// Only names starting with `PCRLAB_` are considered.
    pub fn load<I, K, V>(text: &str, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| PcrError::Config(e.to_string()))?;
        let mut overrides: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| {
                k.as_ref()
                    .strip_prefix(ENV_PREFIX)
                    .map(|name| (name.to_string(), v.as_ref().to_string()))
            })
            .collect();
        overrides.sort();
        for (name, raw) in overrides {
            let key = KEYS
                .iter()
                .map(|k| k.0)
                .find(|k| k.eq_ignore_ascii_case(&name))
                .ok_or_else(|| PcrError::Config(format!("unknown override {ENV_PREFIX}{name}")))?;
            table.insert(key.to_string(), env_value(&raw));
        }
        let config: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| PcrError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::load(&text, std::env::vars())
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(PcrError::Config("threads must be at least 1".into()));
        }
        if self.t.values().is_empty() {
            return Err(PcrError::Config("the grid is empty".into()));
        }
        if self.spike_constants.is_empty() {
            return Err(PcrError::Config("spike_constants must not be empty".into()));
        }
        Ok(())
    }

    pub fn sample_sizes(&self) -> Vec<usize> {
        self.t.values()
    }

    pub fn template(&self) -> SpecTemplate {
        let theta = Coefficients::Eigen {
            scores: self.vartheta.clone(),
            tail: self.gamma_tail.clone(),
        };
        let link = match self.link {
            LinkKind::Linear => Link::Linear { theta },
            LinkKind::Quadratic => Link::LinearPlusQuadratic {
                theta,
                q: self.quad_coefficient,
                w: Coefficients::Eigen {
                    scores: self.quad_direction.clone(),
                    tail: vec![],
                },
            },
        };
        SpecTemplate {
            alpha: self.alpha,
            spike_constants: self.spike_constants.clone(),
            tail_constant: self.tail_constant,
            rho: self.rho,
            link,
            noise_sd: self.noise_sd,
            eigvec_style: self.eigvec_style,
        }
    }

    pub fn grid(&self) -> Result<Vec<Cell>> {
        expand_grid(&self.sample_sizes(), self.p_rule, self.k_rule, self.p_max)
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let config = SweepConfig {
            template: self.template(),
            grid: self.grid()?,
            replications: self.replications,
            seed: self.seed,
            diagnostics: self.diagnostics,
            r_alpha_proxy: self.r_alpha_proxy,
            threads: self.threads,
        };
        config.validate()?;
        Ok(config)
    }

    /// The first cell of the grid together with its specification.
    pub fn first_cell(&self) -> Result<(Cell, DgpSpec)> {
        let t = self.sample_sizes()[0];
        if t == 0 {
            return Err(PcrError::Config("T must be at least 1".into()));
        }
        let cell = self.grid()?[0];
        let spec = self.template().instantiate(cell.p, cell.k, self.seed)?;
        spec.validate()?;
        Ok((cell, spec))
    }

    pub fn slope_check(&self) -> Option<SlopeCheck> {
        matches!(self.check, CheckMode::Slope | CheckMode::Both).then_some(SlopeCheck {
            response: self.check_response,
            slope_min: self.slope_min,
            slope_max: self.slope_max,
            r_squared_min: self.r_squared_min,
        })
    }

    pub fn bound_check(&self) -> Option<BoundCheck> {
        matches!(self.check, CheckMode::Bound | CheckMode::Both).then_some(BoundCheck {
            max_violations: self.max_violations,
            max_degenerate_fraction: self.max_degenerate_fraction,
        })
    }
}

/// Environment values are read as TOML values, falling back to plain strings.
fn env_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Key table printed under `--help`.
pub fn keys_help() -> String {
    let width = KEYS.iter().map(|k| k.0.len()).max().unwrap_or(0);
    let mut out = String::from("Config keys (TOML; override with PCRLAB_<KEY>):\n");
    for (key, default, meaning) in KEYS {
        out.push_str(&format!("  {key:<width$}  default {default}: {meaning}\n"));
    }
    out
}
