//! Cumulative empirical risks of a fixed roster of learners.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Running sums of per-slice averaged losses, one per learner. The empirical
/// risk of learner `j` after `t` slices is `sum_j / t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskLedger {
    learner_ids: Vec<String>,
    sums: Vec<f64>,
    times_seen: usize,
}

impl RiskLedger {
    pub fn new(learner_ids: Vec<String>) -> Self {
        let sums = vec![0.0; learner_ids.len()];
        Self {
            learner_ids,
            sums,
            times_seen: 0,
        }
    }

    pub fn learner_ids(&self) -> &[String] {
        &self.learner_ids
    }

    pub fn times_seen(&self) -> usize {
        self.times_seen
    }

    pub fn cumulative_sums(&self) -> &[f64] {
        &self.sums
    }

    /// Adds one slice worth of losses, given in roster order.
    pub fn update(&self, slice_losses: &[f64]) -> Result<RiskLedger> {
        if slice_losses.len() != self.sums.len() {
            return Err(Error::LearnerMismatch(format!(
                "expected {} losses, got {}",
                self.sums.len(),
                slice_losses.len()
            )));
        }
        if let Some(bad) = slice_losses.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::LearnerMismatch(format!("invalid slice loss {bad}")));
        }
        Ok(RiskLedger {
            learner_ids: self.learner_ids.clone(),
            sums: self
                .sums
                .iter()
                .zip(slice_losses)
                .map(|(s, l)| s + l)
                .collect(),
            times_seen: self.times_seen + 1,
        })
    }

    /// Adds one slice of losses keyed by learner id; every registered learner
    /// must appear exactly once.
    pub fn update_named<'a, I>(&self, losses: I) -> Result<RiskLedger>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut ordered = vec![f64::NAN; self.sums.len()];
        for (id, loss) in losses {
            let j = self
                .index_of(id)
                .ok_or_else(|| Error::LearnerMismatch(format!("unknown learner {id}")))?;
            if !ordered[j].is_nan() {
                return Err(Error::LearnerMismatch(format!("duplicate loss for {id}")));
            }
            ordered[j] = loss;
        }
        if let Some(j) = ordered.iter().position(|l| l.is_nan()) {
            return Err(Error::LearnerMismatch(format!(
                "no loss for learner {}",
                self.learner_ids[j]
            )));
        }
        self.update(&ordered)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.learner_ids.iter().position(|l| l == id)
    }

    /// Empirical risks `R_hat_{j,t}` in roster order.
    pub fn risks(&self) -> Result<Vec<f64>> {
        if self.times_seen == 0 {
            return Err(Error::EmptyLedger);
        }
        let t = self.times_seen as f64;
        Ok(self.sums.iter().map(|s| s / t).collect())
    }

    pub fn risk(&self, id: &str) -> Result<f64> {
        let j = self
            .index_of(id)
            .ok_or_else(|| Error::LearnerMismatch(format!("unknown learner {id}")))?;
        Ok(self.risks()?[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn ledger() -> RiskLedger {
        RiskLedger::new(vec!["a".to_string(), "b".to_string()])
    }

    #[test]
    fn running_means() {
        let l1 = ledger().update_named([("a", 2.0), ("b", 4.0)]).unwrap();
        assert_eq!(l1.times_seen(), 1);
        assert_eq!(l1.risks().unwrap(), [2.0, 4.0]);
        let l2 = l1.update_named([("b", 0.0), ("a", 0.0)]).unwrap();
        assert_eq!(l2.risks().unwrap(), [1.0, 2.0]);
        // the original ledger is untouched
        assert_eq!(l1.times_seen(), 1);
    }

    #[test]
    fn constant_sequence() {
        let mut l = RiskLedger::new(vec!["a".to_string()]);
        for _ in 0..3 {
            l = l.update(&[0.7]).unwrap();
        }
        assert!((l.risk("a").unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn mismatches_are_errors() {
        let l = ledger();
        assert!(l.update_named([("a", 1.0)]).is_err());
        assert!(l.update_named([("a", 1.0), ("c", 1.0)]).is_err());
        assert!(l.update(&[1.0]).is_err());
        assert_eq!(l.risks(), Err(Error::EmptyLedger));
    }
}
