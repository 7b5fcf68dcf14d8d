//! Base learners. Each learner is refit from scratch on the pooled declared
//! observations of the history at every time step and returns an immutable
//! [`PredictorSnapshot`] stamped with the time it was fit at.

mod boost;
mod knn;
mod linear;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::data::{History, TimeSlice, UnitId};
use crate::{Error, Result};

pub use boost::Stump;
pub use knn::{ks_distance, KnnRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LearnerFamily {
    /// Mean of the declared outcomes; `value` pins it to a fixed constant.
    ConstantMean,
    /// Minimum-norm least squares with an intercept.
    OrdinaryLeastSquares,
    /// `penalty` (default 1) on the slopes; the intercept is not penalized.
    Ridge,
    /// Mean outcome of the `k` (default 5) nearest rows under the
    /// Kolmogorov-Smirnov distance between the summary entries
    /// `block_start..block_start + block_len` (default: the whole summary).
    KsKnn,
    /// `rounds` (default 20) of depth-one trees with `shrinkage` (default 0.1).
    StumpBoost,
}

impl LearnerFamily {
    pub fn name(self) -> &'static str {
        match self {
            LearnerFamily::ConstantMean => "constant-mean",
            LearnerFamily::OrdinaryLeastSquares => "ordinary-least-squares",
            LearnerFamily::Ridge => "ridge",
            LearnerFamily::KsKnn => "ks-knn",
            LearnerFamily::StumpBoost => "stump-boost",
        }
    }

    fn allowed_keys(self) -> &'static [&'static str] {
        match self {
            LearnerFamily::ConstantMean => &["value"],
            LearnerFamily::OrdinaryLeastSquares => &[],
            LearnerFamily::Ridge => &["penalty"],
            LearnerFamily::KsKnn => &["k", "block_start", "block_len"],
            LearnerFamily::StumpBoost => &["rounds", "shrinkage"],
        }
    }
}

impl core::str::FromStr for LearnerFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "constant-mean" => LearnerFamily::ConstantMean,
            "ordinary-least-squares" | "ols" => LearnerFamily::OrdinaryLeastSquares,
            "ridge" => LearnerFamily::Ridge,
            "ks-knn" => LearnerFamily::KsKnn,
            "stump-boost" => LearnerFamily::StumpBoost,
            other => return Err(Error::InvalidLearner(format!("unknown family {other:?}"))),
        })
    }
}

pub const DEFAULT_RIDGE_PENALTY: f64 = 1.0;
pub const DEFAULT_KNN_K: usize = 5;
pub const DEFAULT_BOOST_ROUNDS: usize = 20;
pub const DEFAULT_BOOST_SHRINKAGE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LearnerSpec {
    pub id: String,
    pub family: LearnerFamily,
    #[cfg_attr(feature = "serde", serde(default))]
    pub hyperparameters: BTreeMap<String, f64>,
}

impl LearnerSpec {
    pub fn new(id: impl Into<String>, family: LearnerFamily) -> Self {
        Self {
            id: id.into(),
            family,
            hyperparameters: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.hyperparameters.insert(key.into(), value);
        self
    }

    fn param(&self, key: &str) -> Option<f64> {
        self.hyperparameters.get(key).copied()
    }

    fn count_param(&self, key: &str, default: usize, min: usize) -> Result<usize> {
        match self.param(key) {
            None => Ok(default),
            Some(v) if libm::trunc(v) == v && v >= min as f64 && v < 1e9 => Ok(v as usize),
            Some(v) => Err(Error::InvalidLearner(format!(
                "{}: {key} must be an integer >= {min}, got {v}",
                self.id
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidLearner("empty learner id".into()));
        }
        let allowed = self.family.allowed_keys();
        if let Some(k) = self.hyperparameters.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidLearner(format!(
                "{}: unknown hyperparameter {k:?} for {}",
                self.id,
                self.family.name()
            )));
        }
        if let Some((k, v)) = self.hyperparameters.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidLearner(format!("{}: {k} = {v}", self.id)));
        }
        match self.family {
            LearnerFamily::Ridge => {
                if self.penalty() < 0.0 {
                    return Err(Error::InvalidLearner(format!(
                        "{}: ridge penalty must be >= 0",
                        self.id
                    )));
                }
            }
            LearnerFamily::KsKnn => {
                self.count_param("k", DEFAULT_KNN_K, 1)?;
                self.count_param("block_start", 0, 0)?;
                self.count_param("block_len", 0, 0)?;
            }
            LearnerFamily::StumpBoost => {
                self.count_param("rounds", DEFAULT_BOOST_ROUNDS, 1)?;
                let s = self.shrinkage();
                if !(s > 0.0 && s <= 1.0) {
                    return Err(Error::InvalidLearner(format!(
                        "{}: shrinkage must be in (0, 1], got {s}",
                        self.id
                    )));
                }
            }
            LearnerFamily::ConstantMean | LearnerFamily::OrdinaryLeastSquares => {}
        }
        Ok(())
    }

    fn penalty(&self) -> f64 {
        self.param("penalty").unwrap_or(DEFAULT_RIDGE_PENALTY)
    }

    fn shrinkage(&self) -> f64 {
        self.param("shrinkage").unwrap_or(DEFAULT_BOOST_SHRINKAGE)
    }
}

/// Checks every spec and the uniqueness of ids.
pub fn validate_registry(specs: &[LearnerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidLearner("empty learner registry".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        s.validate()?;
        if specs[..i].iter().any(|o| o.id == s.id) {
            return Err(Error::InvalidLearner(format!("duplicate learner id {:?}", s.id)));
        }
    }
    Ok(())
}

/// Fitted state of a learner.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Zero,
    Constant(f64),
    Linear { intercept: f64, coefficients: Vec<f64> },
    Knn {
        k: usize,
        block_start: usize,
        block_len: usize,
        rows: Arc<Vec<KnnRow>>,
    },
    Stumps {
        base: f64,
        shrinkage: f64,
        stumps: Vec<Stump>,
        dim: usize,
    },
}

/// A fitted predictor `theta_{j,t}`: the learner's fit on slices `1..=fit_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSnapshot {
    pub learner_id: String,
    pub fit_time: usize,
    /// Predictions are clipped to `[0, outcome_bound]`; `None` only for the
    /// zero predictor, which needs no clipping.
    pub outcome_bound: Option<f64>,
    pub model: Model,
}

/// The pre-specified `theta_{j,0}`: the constant-zero predictor.
pub fn initial_predictor(spec: &LearnerSpec) -> PredictorSnapshot {
    PredictorSnapshot {
        learner_id: spec.id.clone(),
        fit_time: 0,
        outcome_bound: None,
        model: Model::Zero,
    }
}

/// Fits `spec` on every declared observation of the history. With no declared
/// observation the zero predictor is returned, stamped with the history length.
pub fn refit(spec: &LearnerSpec, history: History<'_>) -> Result<PredictorSnapshot> {
    spec.validate()?;
    if history.is_empty() {
        return Err(Error::InvalidDataset("refit on an empty history".into()));
    }
    let fit_time = history.slices.last().map(|s| s.time_index()).unwrap_or(0);
    let bound = history.outcome_bound;
    let mut snap = PredictorSnapshot {
        learner_id: spec.id.clone(),
        fit_time,
        outcome_bound: Some(bound),
        model: Model::Zero,
    };
    let n_declared = history.declared().count();
    if n_declared == 0 && spec.param("value").is_none() {
        log::debug!("{}: no declared observations at t = {fit_time}, keeping zero predictor", spec.id);
        return Ok(snap);
    }
    snap.model = match spec.family {
        LearnerFamily::ConstantMean if spec.param("value").is_some() => {
            Model::Constant(spec.param("value").unwrap_or(0.0))
        }
        LearnerFamily::ConstantMean => {
            let sum: f64 = history.declared().map(|(_, o)| o.outcome).sum();
            Model::Constant(sum / n_declared as f64)
        }
        LearnerFamily::OrdinaryLeastSquares => linear::fit(history, None),
        LearnerFamily::Ridge => linear::fit(history, Some(spec.penalty())),
        LearnerFamily::KsKnn => {
            let first = &history.slices[0];
            let p = first.summary_dim();
            let block_start = spec.count_param("block_start", 0, 0)?;
            let block_len = match spec.count_param("block_len", 0, 0)? {
                0 => p.saturating_sub(block_start),
                l => l,
            };
            if block_len == 0 || block_start + block_len > p {
                return Err(Error::InvalidLearner(format!(
                    "{}: quantile block [{block_start}, {}) outside a summary of length {p}",
                    spec.id,
                    block_start + block_len
                )));
            }
            knn::fit(
                history,
                spec.count_param("k", DEFAULT_KNN_K, 1)?,
                block_start,
                block_len,
            )?
        }
        LearnerFamily::StumpBoost => boost::fit(
            history,
            spec.count_param("rounds", DEFAULT_BOOST_ROUNDS, 1)?,
            spec.shrinkage(),
        ),
    };
    Ok(snap)
}

impl PredictorSnapshot {
    /// A fixed linear predictor, clipped to `[0, bound]`; handy for oracles.
    pub fn linear(
        learner_id: impl Into<String>,
        fit_time: usize,
        intercept: f64,
        coefficients: Vec<f64>,
        bound: f64,
    ) -> Self {
        Self {
            learner_id: learner_id.into(),
            fit_time,
            outcome_bound: Some(bound),
            model: Model::Linear {
                intercept,
                coefficients,
            },
        }
    }

    pub fn constant(learner_id: impl Into<String>, fit_time: usize, value: f64, bound: f64) -> Self {
        Self {
            learner_id: learner_id.into(),
            fit_time,
            outcome_bound: Some(bound),
            model: Model::Constant(value),
        }
    }

    /// Number of features the model expects, if it looks at features at all.
    pub fn feature_dim(&self) -> Option<usize> {
        match &self.model {
            Model::Zero | Model::Constant(_) => None,
            Model::Linear { coefficients, .. } => Some(coefficients.len()),
            Model::Knn { .. } => None,
            Model::Stumps { dim, .. } => Some(*dim),
        }
    }

    fn clip(&self, v: f64) -> f64 {
        match self.outcome_bound {
            Some(b) if v.is_finite() => v.clamp(0.0, b),
            Some(_) => 0.0,
            None => v,
        }
    }

    /// Prediction at covariates `x` and summary `z`.
    pub fn predict_features(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        if let Some(d) = self.feature_dim() {
            if x.len() + z.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len() + z.len(),
                });
            }
        }
        let raw = match &self.model {
            Model::Zero => 0.0,
            Model::Constant(c) => *c,
            Model::Linear {
                intercept,
                coefficients,
            } => {
                intercept
                    + x.iter()
                        .chain(z)
                        .zip(coefficients)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            }
            Model::Knn {
                k,
                block_start,
                block_len,
                rows,
            } => {
                if block_start + block_len > z.len() {
                    return Err(Error::DimensionMismatch {
                        expected: block_start + block_len,
                        got: z.len(),
                    });
                }
                knn::predict(rows, *k, &z[*block_start..block_start + block_len])?
            }
            Model::Stumps {
                base,
                shrinkage,
                stumps,
                ..
            } => boost::predict(*base, *shrinkage, stumps, x, z),
        };
        Ok(self.clip(raw))
    }

    /// Predictions aligned with `slice.units()`; undeclared units get 0.
    pub fn predict_aligned(&self, slice: &TimeSlice) -> Result<Vec<f64>> {
        slice
            .units()
            .iter()
            .map(|u| {
                if u.declared {
                    self.predict_features(&u.covariates, &u.summary)
                } else {
                    Ok(0.0)
                }
            })
            .collect()
    }

    pub fn predict(&self, slice: &TimeSlice) -> Result<BTreeMap<UnitId, f64>> {
        let p = self.predict_aligned(slice)?;
        Ok(slice.unit_ids().cloned().zip(p).collect())
    }
}
