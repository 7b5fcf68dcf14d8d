//! A Super Learner over Super Learners: each inner learner (one per
//! meta-learning method) contributes its one-step-ahead prediction as a
//! column; the overarching learner picks the inner learner with the smallest
//! cumulative risk and also fits nonnegative least squares weights.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{combine, discrete_select, nnls_meta, EnsembleState, MetaDesign};
use crate::data::TimeSlice;
use crate::ledger::RiskLedger;
use crate::loss::{averaged_loss_aligned, LossSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OverarchingRecord {
    pub time: usize,
    /// Zero-based index of the inner Super Learner with least cumulative risk.
    pub discrete_pick: usize,
    /// NNLS weights over the inner learners, as solved.
    pub raw_weights: Vec<f64>,
    /// `raw_weights` rescaled to sum one (the discrete pick when all are 0).
    pub normalized_weights: Vec<f64>,
    pub inner_risks: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OverarchingState {
    inners: Vec<EnsembleState>,
    ledger: RiskLedger,
    design: MetaDesign,
    records: Vec<OverarchingRecord>,
    loss: LossSpec,
}

impl OverarchingState {
    pub fn new(inners: Vec<EnsembleState>) -> Result<Self> {
        check_aligned(&inners)?;
        let ids: Vec<String> = inners
            .iter()
            .enumerate()
            .map(|(k, s)| format!("{}#{k}", s.method().name()))
            .collect();
        let bound = inners[0].outcome_bound();
        Ok(Self {
            ledger: RiskLedger::new(ids),
            design: MetaDesign::new(inners.len()),
            records: Vec::new(),
            loss: LossSpec::least_squares(bound),
            inners,
        })
    }

    pub fn inners(&self) -> &[EnsembleState] {
        &self.inners
    }

    pub fn records(&self) -> &[OverarchingRecord] {
        &self.records
    }

    pub fn ledger(&self) -> &RiskLedger {
        &self.ledger
    }

    /// Prediction from the normalized NNLS weights over the inner learners.
    pub fn predict_aligned(&self, slice: &TimeSlice) -> Result<Vec<f64>> {
        let cols = self
            .inners
            .iter()
            .map(|s| s.predict_aligned(slice))
            .collect::<Result<Vec<_>>>()?;
        let w = match self.records.last() {
            Some(r) => r.normalized_weights.clone(),
            None => vertex(self.inners.len(), 0),
        };
        Ok(combine(&cols, &w, self.loss.outcome_bound))
    }

    pub fn advance(mut self, slice: Arc<TimeSlice>) -> Result<Self> {
        check_aligned(&self.inners)?;
        let t = self.ledger.times_seen() + 1;
        let cols = self
            .inners
            .iter()
            .map(|s| s.predict_aligned(&slice))
            .collect::<Result<Vec<_>>>()?;
        let losses = cols
            .iter()
            .map(|c| averaged_loss_aligned(&self.loss, c, &slice))
            .collect::<Result<Vec<_>>>()?;
        self.ledger = self.ledger.update(&losses)?;
        let k = self.inners.len();
        let mut row = vec![0.0; k];
        for (i, u) in slice.units().iter().enumerate() {
            if u.declared {
                for (r, c) in row.iter_mut().zip(&cols) {
                    *r = c[i];
                }
                self.design.push_row(&row, u.outcome)?;
            }
        }
        let inner_risks = self.ledger.risks()?;
        let discrete_pick = discrete_select(&inner_risks)?;
        let raw_weights = if self.design.is_empty() {
            vertex(k, discrete_pick)
        } else {
            nnls_meta(&self.design)?
        };
        let total: f64 = raw_weights.iter().sum();
        let normalized_weights = if total > 0.0 {
            raw_weights.iter().map(|w| w / total).collect()
        } else {
            vertex(k, discrete_pick)
        };
        self.inners = self
            .inners
            .into_iter()
            .map(|s| s.advance(slice.clone()))
            .collect::<Result<_>>()?;
        self.records.push(OverarchingRecord {
            time: t,
            discrete_pick,
            raw_weights,
            normalized_weights,
            inner_risks,
        });
        Ok(self)
    }
}

/// One overarching step from scratch state values; returns the new state with
/// the discrete pick and NNLS weights of this step in its last record.
pub fn overarching_step(state: &OverarchingState, slice: &TimeSlice) -> Result<OverarchingState> {
    state.clone().advance(Arc::new(slice.clone()))
}

fn vertex(k: usize, i: usize) -> Vec<f64> {
    let mut w = vec![0.0; k];
    w[i] = 1.0;
    w
}

fn check_aligned(inners: &[EnsembleState]) -> Result<()> {
    let Some(first) = inners.first() else {
        return Err(Error::Misaligned("no inner Super Learners".into()));
    };
    for s in inners {
        if s.times_seen() != first.times_seen() {
            return Err(Error::Misaligned(format!(
                "inner learners have seen {} and {} slices",
                first.times_seen(),
                s.times_seen()
            )));
        }
        if s.outcome_bound() != first.outcome_bound() {
            return Err(Error::Misaligned("outcome bounds differ".into()));
        }
    }
    Ok(())
}
