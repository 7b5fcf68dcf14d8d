//! Squared-error gradient boosting with depth-one trees.

use alloc::vec;
use alloc::vec::Vec;

use super::Model;
use crate::data::History;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    fn eval(&self, v: f64) -> f64 {
        if v <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

pub(super) fn fit(history: History<'_>, rounds: usize, shrinkage: f64) -> Model {
    let dim = history.slices[0].covariate_dim() + history.slices[0].summary_dim();
    let mut features: Vec<Vec<f64>> = vec![Vec::new(); dim];
    let mut y = Vec::new();
    for (_, o) in history.declared() {
        for (f, v) in features.iter_mut().zip(o.features()) {
            f.push(v);
        }
        y.push(o.outcome);
    }
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let order: Vec<Vec<usize>> = features
        .iter()
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| f[a].total_cmp(&f[b]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut resid: Vec<f64> = y.iter().map(|v| v - base).collect();
    let mut stumps = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let Some(stump) = best_stump(&features, &order, &resid) else {
            break;
        };
        for (i, r) in resid.iter_mut().enumerate() {
            *r -= shrinkage * stump.eval(features[stump.feature][i]);
        }
        stumps.push(stump);
    }
    Model::Stumps {
        base,
        shrinkage,
        stumps,
        dim,
    }
}

/// Exact greedy split over all features at midpoints between consecutive
/// distinct values. Ties keep the first feature and the lowest threshold.
fn best_stump(features: &[Vec<f64>], order: &[Vec<usize>], resid: &[f64]) -> Option<Stump> {
    let n = resid.len();
    let total: f64 = resid.iter().sum();
    let mut best: Option<(f64, Stump)> = None;
    for (f, idx) in order.iter().enumerate() {
        let vals = &features[f];
        let mut left = 0.0;
        for k in 0..n.saturating_sub(1) {
            left += resid[idx[k]];
            let (a, b) = (vals[idx[k]], vals[idx[k + 1]]);
            if a == b {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = (n - k - 1) as f64;
            let right = total - left;
            let gain = left * left / nl + right * right / nr;
            if best.as_ref().is_none_or(|(g, _)| gain > *g * (1.0 + 1e-12)) {
                best = Some((
                    gain,
                    Stump {
                        feature: f,
                        threshold: 0.5 * (a + b),
                        left: left / nl,
                        right: right / nr,
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

pub(super) fn predict(base: f64, shrinkage: f64, stumps: &[Stump], x: &[f64], z: &[f64]) -> f64 {
    let value = |f: usize| if f < x.len() { x[f] } else { z[f - x.len()] };
    base + shrinkage * stumps.iter().map(|s| s.eval(value(s.feature))).sum::<f64>()
}
