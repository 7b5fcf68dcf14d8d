//! The one-step ahead sequential Super Learner.
//!
//! At time `t` every learner's snapshot fit on slices `1..t-1` is scored on
//! slice `t`, the cumulative empirical risks are updated, the meta-learner
//! picks a learner (or weights) and finally every learner is refit on
//! `1..t`.

mod design;
mod nnls;
mod overarching;
mod simplex;

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{History, TimeSlice};
use crate::learners::{self, LearnerSpec, PredictorSnapshot};
use crate::ledger::RiskLedger;
use crate::loss::{averaged_loss_aligned, LossSpec};
use crate::{Error, Result};

pub use design::{Gram, MetaDesign};
pub use nnls::{nnls_gram, nnls_kkt_residual, nnls_meta};
pub use overarching::{overarching_step, OverarchingRecord, OverarchingState};
pub use simplex::{
    continuous_select, convex_grid_select, project_to_simplex, SimplexSolver, SimplexWeights,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)
)]
pub enum MetaMethod {
    /// Argmin of the cumulative empirical risks.
    Discrete,
    /// Least squares over the simplex, solved continuously.
    Simplex,
    /// Least squares over the grid `{k / resolution}` of the simplex.
    ConvexGrid { resolution: usize },
    /// Least squares over nonnegative weights (no sum constraint).
    Nnls,
}

impl MetaMethod {
    pub fn name(&self) -> String {
        match self {
            MetaMethod::Discrete => "discrete".into(),
            MetaMethod::Simplex => "simplex".into(),
            MetaMethod::ConvexGrid { resolution } => format!("convex-grid-{resolution}"),
            MetaMethod::Nnls => "nnls".into(),
        }
    }
}

/// Index of the smallest risk; ties go to the lowest index.
pub fn discrete_select(risks: &[f64]) -> Result<usize> {
    if risks.is_empty() {
        return Err(Error::EmptyLedger);
    }
    let mut best = 0;
    for (j, r) in risks.iter().enumerate().skip(1) {
        if *r < risks[best] {
            best = j;
        }
    }
    Ok(best)
}

/// Discrete selection straight from a ledger.
pub fn discrete_select_ledger(ledger: &RiskLedger) -> Result<usize> {
    discrete_select(&ledger.risks()?)
}

/// What happened at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRecord {
    pub time: usize,
    /// Zero-based discrete pick `j_hat_t`.
    pub selected: usize,
    /// Meta-learner weights after seeing slice `t` (a vertex for the
    /// discrete method, raw nonnegative weights for NNLS).
    pub weights: Vec<f64>,
    /// Fit times of the snapshots scored on slice `t`; all equal `t - 1`.
    pub scored_fit_times: Vec<usize>,
    pub slice_losses: Vec<f64>,
    pub empirical_risks: Vec<f64>,
    /// Empirical risk over slices `1..=t` of the combination with `weights`.
    pub combined_risk: f64,
    /// The combination fell back to the discrete pick (no declared rows).
    pub fallback: bool,
    /// One-step-ahead loss on slice `t` of the Super Learner's own prediction
    /// (weights and snapshots from time `t - 1`).
    pub sl_slice_loss: f64,
}

/// Sequential Super Learner state after `t` slices.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    registry: Arc<Vec<LearnerSpec>>,
    method: MetaMethod,
    solver: SimplexSolver,
    loss: LossSpec,
    history: Vec<Arc<TimeSlice>>,
    snapshots: Vec<Arc<PredictorSnapshot>>,
    ledger: RiskLedger,
    design: MetaDesign,
    records: Vec<SelectionRecord>,
    weights: Vec<f64>,
    sl_loss_sum: f64,
}

impl EnsembleState {
    pub fn new(registry: Vec<LearnerSpec>, method: MetaMethod, outcome_bound: f64) -> Result<Self> {
        Self::with_solver(registry, method, outcome_bound, SimplexSolver::default())
    }

    pub fn with_solver(
        registry: Vec<LearnerSpec>,
        method: MetaMethod,
        outcome_bound: f64,
        solver: SimplexSolver,
    ) -> Result<Self> {
        learners::validate_registry(&registry)?;
        if !(outcome_bound.is_finite() && outcome_bound > 0.0) {
            return Err(Error::InvalidDataset(format!(
                "outcome bound {outcome_bound} must be positive and finite"
            )));
        }
        let j = registry.len();
        let snapshots = registry
            .iter()
            .map(|s| Arc::new(learners::initial_predictor(s)))
            .collect();
        let ledger = RiskLedger::new(registry.iter().map(|s| s.id.clone()).collect());
        Ok(Self {
            method,
            solver,
            loss: LossSpec::least_squares(outcome_bound),
            history: Vec::new(),
            snapshots,
            ledger,
            design: MetaDesign::new(j),
            records: Vec::new(),
            weights: learners_vertex(j, 0),
            sl_loss_sum: 0.0,
            registry: Arc::new(registry),
        })
    }

    pub fn registry(&self) -> &[LearnerSpec] {
        &self.registry
    }

    pub fn method(&self) -> MetaMethod {
        self.method
    }

    pub fn outcome_bound(&self) -> f64 {
        self.loss.outcome_bound
    }

    pub fn times_seen(&self) -> usize {
        self.ledger.times_seen()
    }

    pub fn snapshots(&self) -> &[Arc<PredictorSnapshot>] {
        &self.snapshots
    }

    pub fn ledger(&self) -> &RiskLedger {
        &self.ledger
    }

    pub fn design(&self) -> &MetaDesign {
        &self.design
    }

    pub fn records(&self) -> &[SelectionRecord] {
        &self.records
    }

    pub fn history(&self) -> &[Arc<TimeSlice>] {
        &self.history
    }

    /// Current meta weights (before any slice: the first vertex).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cumulative empirical risk of the Super Learner's own one-step-ahead
    /// predictions.
    pub fn sl_empirical_risk(&self) -> Result<f64> {
        match self.times_seen() {
            0 => Err(Error::EmptyLedger),
            t => Ok(self.sl_loss_sum / t as f64),
        }
    }

    /// Every learner's current prediction on a slice, aligned with its units.
    pub fn learner_predictions(&self, slice: &TimeSlice) -> Result<Vec<Vec<f64>>> {
        self.snapshots.iter().map(|s| s.predict_aligned(slice)).collect()
    }

    /// The Super Learner's prediction for the units of `slice` from the
    /// current snapshots and weights. Undeclared units get 0.
    pub fn predict_aligned(&self, slice: &TimeSlice) -> Result<Vec<f64>> {
        let preds = self.learner_predictions(slice)?;
        Ok(combine(&preds, &self.weights, self.loss.outcome_bound))
    }

    /// Processes slice `t = times_seen + 1` and returns the new state.
    pub fn step(&self, slice: &TimeSlice) -> Result<EnsembleState> {
        self.clone().advance(Arc::new(slice.clone()))
    }

    /// Consuming variant of [`step`](Self::step) that avoids copying the state.
    pub fn advance(mut self, slice: Arc<TimeSlice>) -> Result<EnsembleState> {
        let t = self.times_seen() + 1;
        if slice.time_index() != t {
            return Err(Error::OutOfOrder {
                expected: t,
                got: slice.time_index(),
            });
        }
        if let Some(first) = self.history.first() {
            if !first.same_units(&slice) {
                return Err(Error::InvalidDataset(format!(
                    "time {t}: unit set differs from time 1"
                )));
            }
        }
        if let Some(u) = slice.units().iter().find(|u| u.outcome > self.loss.outcome_bound) {
            return Err(Error::InvalidDataset(format!(
                "time {t}: unit {} outcome {} exceeds bound {}",
                u.unit_id, u.outcome, self.loss.outcome_bound
            )));
        }

        let j = self.registry.len();
        let scored_fit_times: Vec<usize> = self.snapshots.iter().map(|s| s.fit_time).collect();
        debug_assert!(scored_fit_times.iter().all(|&f| f + 1 == t));
        let preds = self.learner_predictions(&slice)?;
        let slice_losses = preds
            .iter()
            .map(|p| averaged_loss_aligned(&self.loss, p, &slice))
            .collect::<Result<Vec<f64>>>()?;
        let sl_pred = combine(&preds, &self.weights, self.loss.outcome_bound);
        let sl_slice_loss = averaged_loss_aligned(&self.loss, &sl_pred, &slice)?;

        self.ledger = self.ledger.update(&slice_losses)?;
        self.sl_loss_sum += sl_slice_loss;
        let mut row = vec![0.0; j];
        for (i, u) in slice.units().iter().enumerate() {
            if u.declared {
                for (r, p) in row.iter_mut().zip(&preds) {
                    *r = p[i];
                }
                self.design.push_row(&row, u.outcome)?;
            }
        }

        let risks = self.ledger.risks()?;
        let selected = discrete_select(&risks)?;
        let mut fallback = false;
        let weights = match self.method {
            MetaMethod::Discrete => learners_vertex(j, selected),
            _ if self.design.is_empty() => {
                log::debug!("t = {t}: no declared rows yet, using the discrete pick");
                fallback = true;
                learners_vertex(j, selected)
            }
            MetaMethod::Simplex => self.solver.solve(&self.design)?.weights,
            MetaMethod::ConvexGrid { resolution } => {
                convex_grid_select(&self.design, resolution)?.weights
            }
            MetaMethod::Nnls => nnls_meta(&self.design)?,
        };
        let n_units = slice.len() as f64;
        let combined_risk = if self.design.is_empty() {
            risks[selected]
        } else {
            self.design.objective(&weights) / (t as f64 * n_units)
        };

        self.history.push(slice);
        let history = History {
            slices: &self.history,
            outcome_bound: self.loss.outcome_bound,
        };
        self.snapshots = self
            .registry
            .iter()
            .map(|s| learners::refit(s, history).map(Arc::new))
            .collect::<Result<_>>()?;
        self.records.push(SelectionRecord {
            time: t,
            selected,
            weights: weights.clone(),
            scored_fit_times,
            slice_losses,
            empirical_risks: risks,
            combined_risk,
            fallback,
            sl_slice_loss,
        });
        self.weights = weights;
        Ok(self)
    }
}

fn learners_vertex(j: usize, k: usize) -> Vec<f64> {
    let mut w = vec![0.0; j];
    if j > 0 {
        w[k] = 1.0;
    }
    w
}

/// Weighted combination of aligned prediction columns, clipped to `[0, B]`.
pub(crate) fn combine(preds: &[Vec<f64>], weights: &[f64], bound: f64) -> Vec<f64> {
    let n = preds.first().map(Vec::len).unwrap_or(0);
    (0..n)
        .map(|i| {
            preds
                .iter()
                .zip(weights)
                .map(|(p, w)| w * p[i])
                .sum::<f64>()
                .clamp(0.0, bound)
        })
        .collect()
}
