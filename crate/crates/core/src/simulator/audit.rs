//! Monte Carlo audit of the loss-class assumptions on a simulated panel.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{draw_covariates, OracleHandle};
use crate::bounds::BoundParameters;
use crate::data::PanelDataset;
use crate::learners::PredictorSnapshot;
use crate::{seed, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    /// Draws per predictor, spread over `cells` (time, unit) pairs.
    pub draws: usize,
    pub cells: usize,
    /// Covariate draws per unit for the unit-averaged variances.
    pub draws_per_unit: usize,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            draws: 10_000,
            cells: 100,
            draws_per_unit: 20,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: String,
    /// Largest observed value of the audited statistic.
    pub worst: f64,
    pub bound: f64,
    pub evaluations: usize,
    pub violations: usize,
}

impl AssumptionCheck {
    fn new(name: &str, bound: f64) -> Self {
        Self {
            name: name.into(),
            worst: f64::NEG_INFINITY,
            bound,
            evaluations: 0,
            violations: 0,
        }
    }

    fn record(&mut self, value: f64) {
        self.evaluations += 1;
        self.worst = self.worst.max(value);
        // relative slack for rounding only
        if value > self.bound + 1e-12 * self.bound.abs().max(1.0) {
            self.violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(AssumptionCheck::passed)
    }

    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }
}

/// Random linear predictors (clipped to `[0, B]`), preceded by the zero
/// predictor, the constant `B` and, when available, `theta*` itself.
pub fn random_test_predictors(oracle: &OracleHandle, count: usize, seed_value: u64) -> Vec<PredictorSnapshot> {
    let cfg = oracle.config();
    let b = cfg.outcome_bound;
    let dim = cfg.covariate_dim + cfg.summary_dim;
    let mut out = vec![
        PredictorSnapshot::constant("zero", 0, 0.0, b),
        PredictorSnapshot::constant("top", 0, b, b),
    ];
    out.extend(oracle.star_predictor("star", 0));
    let mut rng = seed::rng(seed_value);
    while out.len() < count {
        let intercept = rng.random::<f64>() * b;
        let coefs = (0..dim).map(|_| (2.0 * rng.random::<f64>() - 1.0) * b).collect();
        out.push(PredictorSnapshot::linear(
            alloc::format!("random{}", out.len()),
            0,
            intercept,
            coefs,
            b,
        ));
    }
    out.truncate(count.max(1));
    out
}

/// Checks, for each predictor `theta`, with `Delta = l(theta) - l(theta*)`:
///
/// * `|Delta| <= b1` and `|Delta - E[Delta | Z]| <= b2` on every draw;
/// * `E[Delta^2 | Z] <= gamma E[Delta | Z]^beta` per (time, unit) cell;
/// * `Var[Delta | Z] <= v1` per cell, and its unit average over each slice;
/// * the time average of `Var[mean Delta | Z]` over the panel against `v2`.
///
/// Conditional moments given the cell's summary average the exact
/// moments given `(X, W)` over covariate draws.
pub fn empirical_assumption_audit(
    dataset: &PanelDataset,
    oracle: &OracleHandle,
    params: &BoundParameters,
    predictors: &[PredictorSnapshot],
    config: &AuditConfig,
) -> Result<AuditReport> {
    let v2 = params.v2()?;
    let mut b1 = AssumptionCheck::new("A2 envelope |Delta| <= b1", params.b1);
    let mut b2 = AssumptionCheck::new("A2 centered envelope <= b2", params.b2);
    let mut a3 = AssumptionCheck::new("A3 E[Delta^2] / (gamma E[Delta]^beta) <= 1", 1.0);
    let mut a4 = AssumptionCheck::new("A4 Var[Delta | Z] <= v1", params.v1);
    let mut a4_avg = AssumptionCheck::new("A4 unit-averaged var <= v1", params.v1);
    let mut tv = AssumptionCheck::new("time-averaged var of the mean <= v2", v2);

    let cfg = oracle.config();
    let units = dataset.unit_count();
    let horizon = dataset.horizon();
    let cells = config.cells.max(1);
    let per_cell = (config.draws / cells).max(1);
    let mut rng = seed::rng(seed::substream(config.seed, 11));
    let mut e1s = vec![0.0; per_cell];
    let mut deltas = vec![0.0; per_cell];
    for theta in predictors {
        for _ in 0..cells {
            let t = rng.random_range(1..=horizon);
            let i = rng.random_range(0..units);
            let u = &dataset.slice(t).expect("time in range").units()[i];
            let z = &u.summary;
            let p = oracle.declaration_probability(z);
            let sigma2 = oracle.noise_variance(i);
            let mut e2_sum = 0.0;
            for k in 0..per_cell {
                let x = draw_covariates(&mut rng, cfg.covariate_dim);
                let w = rng.random::<f64>() < p;
                let eps: f64 = oracle
                    .loadings(i)
                    .iter()
                    .map(|(_, l)| l * (2.0 * rng.random::<f64>() - 1.0))
                    .sum();
                let d = oracle.theta_star(&x, z) - theta.predict_features(&x, z)?;
                let (delta, e1, e2) = if w {
                    (d * d + 2.0 * eps * d, d * d, d * d * (d * d + 4.0 * sigma2))
                } else {
                    (0.0, 0.0, 0.0)
                };
                deltas[k] = delta;
                e1s[k] = e1;
                e2_sum += e2;
            }
            let mean = e1s.iter().sum::<f64>() / per_cell as f64;
            let second = e2_sum / per_cell as f64;
            for &d in &deltas {
                b1.record(d.abs());
                b2.record((d - mean).abs());
            }
            let denom = params.gamma * libm::pow(mean, params.beta);
            a3.record(if second == 0.0 { 0.0 } else { second / denom });
            a4.record(second - mean * mean);
        }
        let mut var_sum = 0.0;
        for (t, slice) in dataset.slices().iter().enumerate() {
            let g = oracle.gap_moments(
                &[theta],
                slice,
                config.draws_per_unit,
                seed::substream(config.seed, 1000 + t as u64),
            )?[0];
            a4_avg.record(g.unit_variance);
            var_sum += g.average_variance;
        }
        tv.record(var_sum / horizon as f64);
    }
    Ok(AuditReport {
        checks: vec![b1, b2, a3, a4, a4_avg, tv],
    })
}
