//! The least-squares loss gated by the declaration indicator.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::data::{TimeSlice, UnitId, UnitObservation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LossKind {
    /// `(y - p)^2 * 1{w = 1}`
    LeastSquaresWithIndicator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub outcome_bound: f64,
}

impl LossSpec {
    pub fn least_squares(outcome_bound: f64) -> Self {
        Self {
            kind: LossKind::LeastSquaresWithIndicator,
            outcome_bound,
        }
    }

    /// Upper bound on any single loss value.
    pub fn max_value(&self) -> f64 {
        4.0 * self.outcome_bound * self.outcome_bound
    }
}

/// Loss of a single prediction. Predictions must already be clipped to
/// `[0, B]`.
pub fn pointwise_loss(loss: &LossSpec, prediction: f64, obs: &UnitObservation) -> Result<f64> {
    if !(0.0..=loss.outcome_bound).contains(&prediction) {
        return Err(Error::PredictionOutOfRange {
            value: prediction,
            bound: loss.outcome_bound,
        });
    }
    Ok(match loss.kind {
        LossKind::LeastSquaresWithIndicator => {
            if obs.declared {
                let r = obs.outcome - prediction;
                r * r
            } else {
                0.0
            }
        }
    })
}

/// Mean loss over the units of a slice, with predictions keyed by unit.
pub fn averaged_loss(
    loss: &LossSpec,
    predictions: &BTreeMap<UnitId, f64>,
    slice: &TimeSlice,
) -> Result<f64> {
    let missing: Vec<UnitId> = slice
        .unit_ids()
        .filter(|id| !predictions.contains_key(*id))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    let mut total = 0.0;
    for u in slice.units() {
        total += pointwise_loss(loss, predictions[&u.unit_id], u)?;
    }
    Ok(total / slice.len() as f64)
}

/// Same as [`averaged_loss`] with predictions aligned to `slice.units()`.
pub fn averaged_loss_aligned(loss: &LossSpec, predictions: &[f64], slice: &TimeSlice) -> Result<f64> {
    if predictions.len() != slice.len() {
        let missing = slice.units()[predictions.len().min(slice.len())..]
            .iter()
            .map(|u| u.unit_id.clone())
            .collect();
        return Err(Error::MissingPredictions(missing));
    }
    let mut total = 0.0;
    for (u, &p) in slice.units().iter().zip(predictions) {
        total += pointwise_loss(loss, p, u)?;
    }
    Ok(total / slice.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn obs(id: &str, w: bool, y: f64) -> UnitObservation {
        UnitObservation::new(id, w, vec![], vec![], y).unwrap()
    }

    #[test]
    fn pointwise_examples() {
        let l = LossSpec::least_squares(10.0);
        assert_eq!(pointwise_loss(&l, 1.0, &obs("a", true, 3.0)).unwrap(), 4.0);
        assert_eq!(pointwise_loss(&l, 7.0, &obs("a", false, 0.0)).unwrap(), 0.0);
        assert_eq!(pointwise_loss(&l, 3.5, &obs("a", true, 3.5)).unwrap(), 0.0);
        assert!(matches!(
            pointwise_loss(&l, 11.0, &obs("a", true, 3.0)),
            Err(Error::PredictionOutOfRange { .. })
        ));
        assert!(pointwise_loss(&l, -0.1, &obs("a", true, 3.0)).is_err());
    }

    #[test]
    fn averaged_examples() {
        let l = LossSpec::least_squares(10.0);
        let s = TimeSlice::new(1, vec![obs("a", true, 3.0), obs("b", false, 0.0)]).unwrap();
        let p: BTreeMap<UnitId, f64> = [("a".into(), 1.0), ("b".into(), 5.0)].into();
        assert_eq!(averaged_loss(&l, &p, &s).unwrap(), 2.0);

        let undeclared = TimeSlice::new(1, vec![obs("a", false, 0.0), obs("b", false, 0.0)]).unwrap();
        assert_eq!(averaged_loss(&l, &p, &undeclared).unwrap(), 0.0);

        let perfect = TimeSlice::new(
            1,
            vec![obs("a", true, 1.0), obs("b", true, 2.0), obs("c", true, 3.0)],
        )
        .unwrap();
        let p: BTreeMap<UnitId, f64> =
            [("a".into(), 1.0), ("b".into(), 2.0), ("c".into(), 3.0)].into();
        assert_eq!(averaged_loss(&l, &p, &perfect).unwrap(), 0.0);
        assert_eq!(averaged_loss_aligned(&l, &[1.0, 2.0, 3.0], &perfect).unwrap(), 0.0);
    }

    #[test]
    fn missing_units_are_listed() {
        let l = LossSpec::least_squares(10.0);
        let s = TimeSlice::new(1, vec![obs("a", true, 3.0), obs("b", true, 1.0)]).unwrap();
        let p: BTreeMap<UnitId, f64> = [("a".into(), 1.0)].into();
        assert_eq!(
            averaged_loss(&l, &p, &s),
            Err(Error::MissingPredictions(vec!["b".into()]))
        );
    }
}
