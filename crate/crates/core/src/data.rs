//! Panel observations: one [`TimeSlice`] per time step, each holding one
//! [`UnitObservation`] per unit of a fixed unit set.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Opaque unit identifier. Ordering is lexical and is used for every
/// deterministic tie-break in the crate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct UnitId(pub String);

impl UnitId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UnitId {
    fn from(s: &str) -> Self {
        UnitId(String::from(s))
    }
}

impl From<String> for UnitId {
    fn from(s: String) -> Self {
        UnitId(s)
    }
}

/// One `(unit, time)` record: declaration flag `w`, covariates `x`, summary
/// `z` and outcome `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitObservation {
    pub unit_id: UnitId,
    pub declared: bool,
    pub covariates: Vec<f64>,
    pub summary: Vec<f64>,
    pub outcome: f64,
}

impl UnitObservation {
    /// Checks finiteness, nonnegativity and the `w = 0 => y = 0` convention.
    /// The upper outcome bound is checked when the observation joins a
    /// [`PanelDataset`].
    pub fn new(
        unit_id: impl Into<UnitId>,
        declared: bool,
        covariates: Vec<f64>,
        summary: Vec<f64>,
        outcome: f64,
    ) -> Result<Self> {
        let unit_id = unit_id.into();
        if !outcome.is_finite() || outcome < 0.0 {
            return Err(Error::InvalidObservation(format!(
                "unit {unit_id}: outcome {outcome} must be finite and nonnegative"
            )));
        }
        if !declared && outcome != 0.0 {
            return Err(Error::InvalidObservation(format!(
                "unit {unit_id}: undeclared unit has nonzero outcome {outcome}"
            )));
        }
        if covariates.iter().chain(summary.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidObservation(format!(
                "unit {unit_id}: non-finite covariate or summary value"
            )));
        }
        Ok(Self {
            unit_id,
            declared,
            covariates,
            summary,
            outcome,
        })
    }

    /// Learner features: covariates followed by the summary.
    pub fn features(&self) -> impl Iterator<Item = f64> + '_ {
        self.covariates.iter().chain(self.summary.iter()).copied()
    }

    pub fn feature_vec(&self) -> Vec<f64> {
        self.features().collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.covariates.len() + self.summary.len()
    }
}

/// All unit observations at one time index, sorted by unit id.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSlice {
    time_index: usize,
    units: Vec<UnitObservation>,
}

impl TimeSlice {
    pub fn new(time_index: usize, mut units: Vec<UnitObservation>) -> Result<Self> {
        if time_index == 0 {
            return Err(Error::InvalidDataset("time indices start at 1".into()));
        }
        if units.is_empty() {
            return Err(Error::InvalidDataset(format!("time {time_index}: no units")));
        }
        units.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));
        for pair in units.windows(2) {
            if pair[0].unit_id == pair[1].unit_id {
                return Err(Error::InvalidDataset(format!(
                    "time {time_index}: duplicate unit {}",
                    pair[0].unit_id
                )));
            }
        }
        let (q, p) = (units[0].covariates.len(), units[0].summary.len());
        if let Some(bad) = units
            .iter()
            .find(|u| u.covariates.len() != q || u.summary.len() != p)
        {
            return Err(Error::InvalidDataset(format!(
                "time {time_index}: unit {} has dimensions ({}, {}) instead of ({q}, {p})",
                bad.unit_id,
                bad.covariates.len(),
                bad.summary.len()
            )));
        }
        Ok(Self { time_index, units })
    }

    pub fn time_index(&self) -> usize {
        self.time_index
    }

    pub fn units(&self) -> &[UnitObservation] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn get(&self, id: &UnitId) -> Option<&UnitObservation> {
        self.units
            .binary_search_by(|u| u.unit_id.cmp(id))
            .ok()
            .map(|i| &self.units[i])
    }

    pub fn unit_ids(&self) -> impl Iterator<Item = &UnitId> {
        self.units.iter().map(|u| &u.unit_id)
    }

    /// Concatenation of the per-unit summaries in unit order.
    pub fn summary_stream(&self) -> Vec<f64> {
        self.units
            .iter()
            .flat_map(|u| u.summary.iter().copied())
            .collect()
    }

    pub fn declared_count(&self) -> usize {
        self.units.iter().filter(|u| u.declared).count()
    }

    pub fn covariate_dim(&self) -> usize {
        self.units[0].covariates.len()
    }

    pub fn summary_dim(&self) -> usize {
        self.units[0].summary.len()
    }

    pub(crate) fn same_units(&self, other: &TimeSlice) -> bool {
        self.units.len() == other.units.len()
            && self
                .units
                .iter()
                .zip(other.units.iter())
                .all(|(a, b)| a.unit_id == b.unit_id)
    }
}

/// A time-ordered sequence of slices over a fixed unit set with outcomes in
/// `[0, outcome_bound]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    slices: Vec<Arc<TimeSlice>>,
    outcome_bound: f64,
}

impl PanelDataset {
    pub fn new(slices: Vec<TimeSlice>, outcome_bound: f64) -> Result<Self> {
        Self::from_shared(slices.into_iter().map(Arc::new).collect(), outcome_bound)
    }

    pub(crate) fn from_shared(slices: Vec<Arc<TimeSlice>>, outcome_bound: f64) -> Result<Self> {
        if !(outcome_bound.is_finite() && outcome_bound > 0.0) {
            return Err(Error::InvalidDataset(format!(
                "outcome bound {outcome_bound} must be positive and finite"
            )));
        }
        let Some(first) = slices.first() else {
            return Err(Error::InvalidDataset("no time slices".into()));
        };
        for (i, slice) in slices.iter().enumerate() {
            if slice.time_index() != i + 1 {
                return Err(Error::InvalidDataset(format!(
                    "slice {} has time index {}; times must be 1, 2, ... without gaps",
                    i + 1,
                    slice.time_index()
                )));
            }
            if !slice.same_units(first) {
                return Err(Error::InvalidDataset(format!(
                    "time {}: unit set differs from time 1",
                    slice.time_index()
                )));
            }
            if slice.covariate_dim() != first.covariate_dim()
                || slice.summary_dim() != first.summary_dim()
            {
                return Err(Error::InvalidDataset(format!(
                    "time {}: feature dimensions differ from time 1",
                    slice.time_index()
                )));
            }
            if let Some(u) = slice.units().iter().find(|u| u.outcome > outcome_bound) {
                return Err(Error::InvalidDataset(format!(
                    "time {}: unit {} outcome {} exceeds bound {outcome_bound}",
                    slice.time_index(),
                    u.unit_id,
                    u.outcome
                )));
            }
        }
        Ok(Self {
            slices,
            outcome_bound,
        })
    }

    pub fn slices(&self) -> &[Arc<TimeSlice>] {
        &self.slices
    }

    pub fn slice(&self, t: usize) -> Option<&TimeSlice> {
        t.checked_sub(1).and_then(|i| self.slices.get(i)).map(|s| &**s)
    }

    pub fn horizon(&self) -> usize {
        self.slices.len()
    }

    pub fn outcome_bound(&self) -> f64 {
        self.outcome_bound
    }

    pub fn unit_count(&self) -> usize {
        self.slices[0].len()
    }

    pub fn unit_ids(&self) -> Vec<UnitId> {
        self.slices[0].unit_ids().cloned().collect()
    }

    /// The dataset truncated to times `1..=t`.
    pub fn history(&self, t: usize) -> History<'_> {
        History {
            slices: &self.slices[..t.min(self.slices.len())],
            outcome_bound: self.outcome_bound,
        }
    }
}

/// Borrowed view on slices `1..=t` used for refitting learners.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    pub slices: &'a [Arc<TimeSlice>],
    pub outcome_bound: f64,
}

impl History<'_> {
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// Declared observations pooled over all times, in time then unit order.
    pub fn declared(&self) -> impl Iterator<Item = (usize, &UnitObservation)> {
        self.slices.iter().flat_map(|s| {
            let t = s.time_index();
            s.units().iter().filter(|u| u.declared).map(move |u| (t, u))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn obs(id: &str, w: bool, y: f64) -> UnitObservation {
        UnitObservation::new(id, w, vec![0.5], vec![], y).unwrap()
    }

    #[test]
    fn undeclared_units_must_have_zero_outcome() {
        assert!(UnitObservation::new("a", false, vec![], vec![], 1.0).is_err());
        assert!(UnitObservation::new("a", false, vec![], vec![], 0.0).is_ok());
    }

    #[test]
    fn slices_are_sorted_and_reject_duplicates() {
        let s = TimeSlice::new(1, vec![obs("b", true, 1.0), obs("a", false, 0.0)]).unwrap();
        let ids: Vec<_> = s.unit_ids().map(|u| u.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert!(TimeSlice::new(1, vec![obs("a", true, 1.0), obs("a", true, 2.0)]).is_err());
    }

    #[test]
    fn panel_rejects_gaps_changing_units_and_large_outcomes() {
        let s1 = TimeSlice::new(1, vec![obs("a", true, 1.0)]).unwrap();
        let s3 = TimeSlice::new(3, vec![obs("a", true, 1.0)]).unwrap();
        assert!(PanelDataset::new(vec![s1.clone(), s3], 2.0).is_err());

        let other = TimeSlice::new(2, vec![obs("b", true, 1.0)]).unwrap();
        assert!(PanelDataset::new(vec![s1.clone(), other], 2.0).is_err());

        assert!(PanelDataset::new(vec![s1.clone()], 0.5).is_err());
        let panel = PanelDataset::new(vec![s1], 2.0).unwrap();
        assert_eq!(panel.unit_count(), 1);
        assert_eq!(panel.history(5).len(), 1);
    }
}
