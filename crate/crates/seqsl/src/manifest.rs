//! Simulation manifests: the law behind a simulated panel and the constants
//! of its loss class.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use seqsl_core::bounds::{self, BoundParameters};
use seqsl_core::simulator::DgpConfig;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub seed: u64,
    #[serde(rename = "B")]
    pub outcome_bound: f64,
    pub b1: f64,
    pub b2: f64,
    pub v1: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a1: f64,
    pub a2: f64,
    pub unit_count: usize,
    pub degree: usize,
    pub ratio: f64,
    pub horizon: usize,
    pub dgp: DgpConfig,
    pub bounds: BoundParameters,
}

impl Manifest {
    /// Manifest of the panel simulated from `config.dgp` with the config's
    /// master seed; bound overrides replace the analytic constants.
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let dgp = config.dgp.clone();
        let c = dgp.constants()?;
        let (a1, a2) = bounds::least_squares_constants(dgp.outcome_bound);
        let o = &config.bounds;
        let mut params = BoundParameters {
            b1: o.b1.unwrap_or(c.b1),
            b2: o.b2.unwrap_or(c.b2),
            beta: o.beta.unwrap_or(c.beta),
            gamma: o.gamma.unwrap_or(c.gamma),
            v1: o.v1.unwrap_or(c.v1),
            ratio: c.ratio,
            a: config.a,
            j: config.learners.len(),
            t: dgp.horizon,
            n: 2,
            n_prime: 2,
        };
        params.validate()?;
        params.n = bounds::minimal_n(&params)?;
        params.n_prime = bounds::minimal_n_prime(&params);
        Ok(Self {
            seed: config.seed,
            outcome_bound: dgp.outcome_bound,
            b1: params.b1,
            b2: params.b2,
            v1: params.v1,
            beta: params.beta,
            gamma: params.gamma,
            a1,
            a2,
            unit_count: dgp.unit_count,
            degree: c.degree,
            ratio: c.ratio,
            horizon: dgp.horizon,
            dgp,
            bounds: params,
        })
    }

    /// The simulator config with the manifest's seed restored.
    pub fn dgp(&self) -> DgpConfig {
        DgpConfig {
            seed: self.seed,
            ..self.dgp.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut m: Self = serde_json::from_str(text)?;
        m.dgp.seed = m.seed;
        Ok(m)
    }
}

/// Reads bound parameters from a manifest file: either a full manifest or a
/// bare `BoundParameters` object.
pub fn load_bound_parameters(path: &Path) -> Result<BoundParameters> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(m) = Manifest::from_json(&text) {
        return Ok(m.bounds);
    }
    serde_json::from_str(&text).with_context(|| {
        format!("{}: neither a manifest nor a set of bound parameters", path.display())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let m = Manifest::from_config(&ExperimentConfig::default()).unwrap();
        let back = Manifest::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.degree, 5);
        assert_eq!(m.ratio, 100.0);
        assert_eq!(m.gamma, 32.0);
        assert!(m.bounds.validate().is_ok());
    }
}
