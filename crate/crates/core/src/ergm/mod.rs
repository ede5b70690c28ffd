//! Exponential-family random graph models.
//!
//! The model assigns P(g) ∝ exp(θᵀ s(g)). Simulation is a Metropolis chain over
//! single-dyad toggles driven by change statistics; fitting matches simulated
//! mean statistics to targets with a stochastic-approximation schedule.

mod chain;
mod fit;
mod terms;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, NodeAttributeSchema};

pub use chain::{simulate, simulate_draws, Chain, SimulationControl};
pub use fit::{fit_moment_matching, FitControl, FitResult};
pub use terms::{change_stats, sufficient_stats, ErgmTerm};

/// Terms with coefficients (log-odds units). Offset coefficients are `fixed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgmModel {
    pub terms: Vec<ErgmTerm>,
    pub theta: Vec<f64>,
    #[serde(default)]
    pub fixed: Vec<bool>,
}

impl ErgmModel {
    pub fn new(terms: Vec<ErgmTerm>, theta: Vec<f64>) -> Result<Self> {
        let fixed = terms.iter().map(ErgmTerm::is_offset).collect();
        let m = ErgmModel { terms, theta, fixed };
        m.validate()?;
        Ok(m)
    }

    pub fn edges_only(theta: f64) -> Self {
        ErgmModel {
            terms: vec![ErgmTerm::Edges],
            theta: vec![theta],
            fixed: vec![false],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.len() != self.theta.len() {
            return Err(Error::input(format!(
                "{} terms but {} coefficients",
                self.terms.len(),
                self.theta.len()
            )));
        }
        if self.fixed.len() != self.terms.len() {
            return Err(Error::input("`fixed` must have one entry per term"));
        }
        for (t, &f) in self.terms.iter().zip(&self.fixed) {
            if t.is_offset() && !f {
                return Err(Error::input("offset terms must be marked fixed"));
            }
            if let ErgmTerm::Degree { k: 0 } = t {
                return Err(Error::input("degree term requires k >= 1"));
            }
        }
        if let Some(x) = self.theta.iter().find(|x| x.is_nan()) {
            return Err(Error::input(format!("coefficient {x} is not a number")));
        }
        Ok(())
    }

    /// Checks that every referenced attribute and level exists.
    pub fn check_schema(&self, schema: &NodeAttributeSchema) -> Result<()> {
        terms::resolve_all(&self.terms, schema).map(|_| ())
    }

    /// Indices of the terms updated by fitting.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.terms.len()).filter(|&k| !self.fixed[k]).collect()
    }

    /// θᵀ(s(g+ij) − s(g−ij)), computed from change statistics only.
    pub fn log_odds_of_toggle(&self, net: &AttributedNetwork, i: usize, j: usize) -> Result<f64> {
        let delta = change_stats(net, &self.terms, i, j)?;
        Ok(delta.iter().zip(&self.theta).map(|(d, t)| d * t).sum())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let mut m: ErgmModel = serde_json::from_str(s)?;
        if m.fixed.is_empty() {
            m.fixed = m.terms.iter().map(ErgmTerm::is_offset).collect();
        }
        m.validate()?;
        Ok(m)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: match e {
                Error::Json(j) => format!("line {}, column {}: {j}", j.line(), j.column()),
                other => other.to_string(),
            },
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}
