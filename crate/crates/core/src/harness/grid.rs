//! Sweep grids: sample sizes and the rules tying `p` and `K` to `T`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PcrError, Result};

/// `C * T^r`, floored. Written as `p = 2*T^0.5`, `p = T`, `K = 1`, ...
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SizeRule {
    pub coefficient: f64,
    pub exponent: f64,
}

impl SizeRule {
    pub fn constant(value: usize) -> Self {
        Self {
            coefficient: value as f64,
            exponent: 0.0,
        }
    }

    pub fn evaluate(&self, t: usize) -> usize {
        let raw = self.coefficient * (t as f64).powf(self.exponent);
        (raw + 1e-9).floor().max(0.0) as usize
    }
}

impl FromStr for SizeRule {
    type Err = PcrError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || PcrError::Config(format!("cannot parse size rule `{s}` (expected e.g. `p = 2*T^0.5`)"));
        let body = match s.split_once('=') {
            Some((lhs, rhs)) => {
                let lhs = lhs.trim();
                if lhs.is_empty() || !lhs.chars().all(|c| c.is_ascii_alphabetic()) {
                    return Err(bad());
                }
                rhs
            }
            None => s,
        };
        let body: String = body.chars().filter(|c| !c.is_whitespace()).collect();
        if body.is_empty() {
            return Err(bad());
        }
        let (coef, power) = match body.split_once('*') {
            Some((c, rest)) => (c.parse::<f64>().map_err(|_| bad())?, Some(rest.to_string())),
            None if body.starts_with('T') => (1.0, Some(body.clone())),
            None => (body.parse::<f64>().map_err(|_| bad())?, None),
        };
        let exponent = match power {
            None => 0.0,
            Some(term) => {
                let rest = term.strip_prefix('T').ok_or_else(bad)?;
                if rest.is_empty() {
                    1.0
                } else {
                    rest.strip_prefix('^')
                        .ok_or_else(bad)?
                        .parse::<f64>()
                        .map_err(|_| bad())?
                }
            }
        };
        if !(coef.is_finite() && coef > 0.0 && exponent.is_finite() && exponent >= 0.0) {
            return Err(bad());
        }
        Ok(Self {
            coefficient: coef,
            exponent,
        })
    }
}

impl TryFrom<String> for SizeRule {
    type Error = PcrError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SizeRule> for String {
    fn from(r: SizeRule) -> String {
        r.to_string()
    }
}

impl fmt::Display for SizeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0.0 {
            write!(f, "{}", self.coefficient)
        } else {
            write!(f, "{}*T^{}", self.coefficient, self.exponent)
        }
    }
}

/// One `(T, p, K)` design point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    #[serde(rename = "T")]
    pub t: usize,
    pub p: usize,
    #[serde(rename = "K")]
    pub k: usize,
}

impl Cell {
    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.p == 0 {
            return Err(PcrError::Config(format!("cell {self:?} has an empty dimension")));
        }
        if self.k == 0 || self.k > self.t.min(self.p) {
            return Err(PcrError::Config(format!(
                "cell T={} p={} needs 1 <= K <= min(T, p), got K={}",
                self.t, self.p, self.k
            )));
        }
        Ok(())
    }
}

/// Expands sample sizes through the `p` and `K` rules.
pub fn expand_grid(t_values: &[usize], p_rule: SizeRule, k_rule: SizeRule, p_max: Option<usize>) -> Result<Vec<Cell>> {
    if t_values.is_empty() {
        return Err(PcrError::Config("the grid is empty".into()));
    }
    t_values
        .iter()
        .map(|&t| {
            let mut p = p_rule.evaluate(t);
            if let Some(cap) = p_max {
                p = p.min(cap);
            }
            let cell = Cell {
                t,
                p,
                k: k_rule.evaluate(t),
            };
            cell.validate()?;
            Ok(cell)
        })
        .collect()
}
