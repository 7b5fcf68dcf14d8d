//! Experiment configuration: one strict TOML file per experiment.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use seqsl_core::ensemble::MetaMethod;
use seqsl_core::learners::{validate_registry, LearnerFamily, LearnerSpec};
use seqsl_core::simulator::DgpConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; every random draw of an experiment derives from it.
    pub seed: u64,
    pub replications: usize,
    /// Slack factor in the oracle inequalities, in `(0, 1]`.
    pub a: f64,
    pub output: Option<PathBuf>,
    pub dgp: DgpConfig,
    pub data: DataConfig,
    pub learners: Vec<LearnerSpec>,
    pub ensemble: EnsembleConfig,
    pub bounds: BoundOverrides,
    pub verify: VerifyConfig,
}

/// User-supplied panel files for `run`; command-line paths take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub panel: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    /// Outcome bound `B` of external data; defaults to `dgp.outcome_bound`.
    pub outcome_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    /// The first method drives selection and verification; with more than
    /// one, `run` also fits the overarching learner over all of them.
    pub methods: Vec<MetaMethod>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            methods: vec![MetaMethod::Simplex],
        }
    }
}

/// Replacements for the analytic constants of the simulator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundOverrides {
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub v1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Times at which tail, expectation and Bernstein checks are made.
    pub times: Vec<usize>,
    /// Points of each log-spaced x grid.
    pub x_points: usize,
    /// Covariate draws per unit in the oracle risks.
    pub draws_per_unit: usize,
    pub janson_draws: usize,
    pub audit_predictors: usize,
    pub audit_draws: usize,
    /// Explicit replication seeds, replacing the ones split from the master
    /// seed (for replaying particular replications).
    pub replication_seeds: Option<Vec<u64>>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            times: vec![2, 5, 10],
            x_points: 25,
            draws_per_unit: 20,
            janson_draws: 100_000,
            audit_predictors: 100,
            audit_draws: 10_000,
            replication_seeds: None,
        }
    }
}

pub fn default_registry() -> Vec<LearnerSpec> {
    vec![
        LearnerSpec::new("mean", LearnerFamily::ConstantMean),
        LearnerSpec::new("ols", LearnerFamily::OrdinaryLeastSquares),
        LearnerSpec::new("ridge", LearnerFamily::Ridge).with("penalty", 10.0),
        LearnerSpec::new("boost", LearnerFamily::StumpBoost)
            .with("rounds", 20.0)
            .with("shrinkage", 0.1),
    ]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let dgp = DgpConfig::default();
        Self {
            seed: dgp.seed,
            replications: 200,
            a: 1.0,
            output: None,
            dgp,
            data: DataConfig::default(),
            learners: default_registry(),
            ensemble: EnsembleConfig::default(),
            bounds: BoundOverrides::default(),
            verify: VerifyConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config: ExperimentConfig = toml::from_str(text)?;
        config.dgp.seed = config.seed;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn emit(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.dgp.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        validate_registry(&self.learners)?;
        if self.learners.is_empty() {
            bail!("the learner registry is empty");
        }
        if self.ensemble.methods.is_empty() {
            bail!("ensemble.methods is empty");
        }
        if !(self.a > 0.0 && self.a <= 1.0) {
            bail!("a = {} must lie in (0, 1]", self.a);
        }
        if self.replications == 0 {
            bail!("replications must be at least 1");
        }
        let v = &self.verify;
        if v.times.iter().any(|&t| t == 0 || t > self.dgp.horizon) {
            bail!("verify.times must lie in 1..={}", self.dgp.horizon);
        }
        if v.x_points < 2 || v.draws_per_unit == 0 || v.janson_draws == 0 || v.audit_draws == 0 {
            bail!("verify.x_points must be >= 2 and the draw counts positive");
        }
        if let Some(seeds) = &v.replication_seeds {
            if seeds.is_empty() {
                bail!("verify.replication_seeds is empty");
            }
        }
        Ok(())
    }
}
