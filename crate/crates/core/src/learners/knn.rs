//! k-nearest neighbours on quantile summaries under the Kolmogorov-Smirnov
//! distance.

use alloc::format;
use alloc::vec::Vec;

use super::Model;
use crate::data::{History, UnitId};
use crate::{Error, Result};

/// Sup-norm distance between the step CDFs putting mass `1/m` on each entry
/// of two sorted vectors of equal length `m`.
pub fn ks_distance(q1: &[f64], q2: &[f64]) -> Result<f64> {
    check_quantiles(q1, q2)?;
    let m = q1.len();
    let (mut i, mut j) = (0, 0);
    let mut best = 0usize;
    // walk the merged support; after consuming every point equal to the
    // current value, i/m and j/m are the two CDFs at that value
    while i < m || j < m {
        let v = match (q1.get(i), q2.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < m && q1[i] <= v {
            i += 1;
        }
        while j < m && q2[j] <= v {
            j += 1;
        }
        best = best.max(i.abs_diff(j));
    }
    Ok(best as f64 / m as f64)
}

fn check_quantiles(q1: &[f64], q2: &[f64]) -> Result<()> {
    if q1.len() != q2.len() {
        return Err(Error::InvalidQuantiles(format!(
            "lengths {} and {} differ",
            q1.len(),
            q2.len()
        )));
    }
    if q1.is_empty() {
        return Err(Error::InvalidQuantiles("empty quantile vectors".into()));
    }
    for q in [q1, q2] {
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidQuantiles("non-finite entry".into()));
        }
        if q.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidQuantiles("vector is not sorted".into()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnRow {
    pub unit_id: UnitId,
    pub time: usize,
    pub quantiles: Vec<f64>,
    pub outcome: f64,
}

pub(super) fn fit(
    history: History<'_>,
    k: usize,
    block_start: usize,
    block_len: usize,
) -> Result<Model> {
    let mut rows: Vec<KnnRow> = history
        .declared()
        .map(|(t, o)| KnnRow {
            unit_id: o.unit_id.clone(),
            time: t,
            quantiles: o.summary[block_start..block_start + block_len].to_vec(),
            outcome: o.outcome,
        })
        .collect();
    for r in &rows {
        check_quantiles(&r.quantiles, &r.quantiles).map_err(|e| {
            Error::InvalidQuantiles(format!("unit {} at time {}: {e}", r.unit_id, r.time))
        })?;
    }
    rows.sort_by(|a, b| a.unit_id.cmp(&b.unit_id).then(a.time.cmp(&b.time)));
    Ok(Model::Knn {
        k,
        block_start,
        block_len,
        rows: rows.into(),
    })
}

/// Mean outcome of the `k` closest rows; equal distances keep the row order
/// (unit id, then time).
pub(super) fn predict(rows: &[KnnRow], k: usize, query: &[f64]) -> Result<f64> {
    let mut dist: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| ks_distance(&r.quantiles, query).map(|d| (d, i)))
        .collect::<Result<_>>()?;
    let k = k.min(dist.len());
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(dist[..k].iter().map(|&(_, i)| rows[i].outcome).sum::<f64>() / k as f64)
}
