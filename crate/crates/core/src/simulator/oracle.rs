//! Conditional risks under the simulated law, given the summaries of a slice.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{draw_covariates, draw_sources, noise, DgpConfig, TruthKind};
use crate::data::TimeSlice;
use crate::learners::PredictorSnapshot;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub value: f64,
    pub standard_error: f64,
}

/// Conditional moments, given the summaries of one slice, of the loss gap
/// `Delta = l(theta) - l(theta*)` of a predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMoments {
    /// `E[mean_alpha Delta_alpha | Z]`, the conditional excess risk.
    pub risk_gap: f64,
    /// Monte Carlo standard error of `risk_gap`.
    pub risk_gap_se: f64,
    /// `mean_alpha Var[Delta_alpha | Z]`.
    pub unit_variance: f64,
    /// `Var[mean_alpha Delta_alpha | Z]`, including the covariances created
    /// by shared noise sources.
    pub average_variance: f64,
}

/// Access to the law of a simulated panel.
#[derive(Debug, Clone)]
pub struct OracleHandle {
    config: DgpConfig,
    loadings: Vec<Vec<(usize, f64)>>,
    sources: usize,
    variances: Vec<f64>,
}

impl OracleHandle {
    pub fn new(config: DgpConfig) -> Result<Self> {
        config.validate()?;
        let (loadings, sources) = config.noise_loadings();
        let variances = loadings
            .iter()
            .map(|row| row.iter().map(|(_, l)| l * l).sum::<f64>() / 3.0)
            .collect();
        Ok(Self {
            config,
            loadings,
            sources,
            variances,
        })
    }

    pub fn config(&self) -> &DgpConfig {
        &self.config
    }

    pub fn theta_star(&self, x: &[f64], z: &[f64]) -> f64 {
        self.config.theta_star(x, z)
    }

    pub fn declaration_probability(&self, z: &[f64]) -> f64 {
        self.config.declaration_probability(z)
    }

    pub fn loadings(&self, unit: usize) -> &[(usize, f64)] {
        &self.loadings[unit]
    }

    pub fn source_count(&self) -> usize {
        self.sources
    }

    /// Variance of the noise of unit `unit` (index in id order).
    pub fn noise_variance(&self, unit: usize) -> f64 {
        self.variances[unit]
    }

    /// `theta*` as a snapshot, available for linear truths.
    pub fn star_predictor(&self, learner_id: &str, fit_time: usize) -> Option<PredictorSnapshot> {
        match self.config.truth {
            TruthKind::Linear => Some(PredictorSnapshot::linear(
                learner_id,
                fit_time,
                self.config.truth_coefficients[0],
                self.config.truth_coefficients[1..].to_vec(),
                self.config.outcome_bound,
            )),
            TruthKind::Piecewise => None,
        }
    }

    fn check_slice(&self, slice: &TimeSlice) -> Result<()> {
        if slice.len() != self.config.unit_count
            || slice.covariate_dim() != self.config.covariate_dim
            || slice.summary_dim() != self.config.summary_dim
        {
            return Err(Error::InvalidDataset(format!(
                "slice at time {} does not come from this simulator",
                slice.time_index()
            )));
        }
        Ok(())
    }

    /// Conditional risk of `theta*` given the slice summaries (exact).
    pub fn star_risk(&self, slice: &TimeSlice) -> Result<f64> {
        self.check_slice(slice)?;
        let total: f64 = slice
            .units()
            .iter()
            .enumerate()
            .map(|(i, u)| self.declaration_probability(&u.summary) * self.variances[i])
            .sum();
        Ok(total / slice.len() as f64)
    }

    /// Observed averaged loss of `theta*` on the slice.
    pub fn star_empirical_loss(&self, slice: &TimeSlice) -> Result<f64> {
        self.check_slice(slice)?;
        let total: f64 = slice
            .units()
            .iter()
            .filter(|u| u.declared)
            .map(|u| {
                let r = u.outcome - self.theta_star(&u.covariates, &u.summary);
                r * r
            })
            .sum();
        Ok(total / slice.len() as f64)
    }

    /// Loss-gap moments of several predictors at once, with common random
    /// covariate draws (`draws_per_unit` fresh covariate vectors per unit).
    /// Noise and declaration are integrated out exactly.
    pub fn gap_moments(
        &self,
        snapshots: &[&PredictorSnapshot],
        slice: &TimeSlice,
        draws_per_unit: usize,
        seed_value: u64,
    ) -> Result<Vec<GapMoments>> {
        self.check_slice(slice)?;
        if draws_per_unit == 0 {
            return Err(Error::InvalidParameters("draws_per_unit must be positive".into()));
        }
        let j = snapshots.len();
        let n = slice.len();
        let m = draws_per_unit as f64;
        let mut rng = seed::rng(seed_value);
        let mut risk = vec![0.0; j];
        let mut se2 = vec![0.0; j];
        let mut unit_var = vec![0.0; j];
        let mut diag_cov = vec![0.0; j];
        let mut loads = vec![vec![0.0; self.sources]; j];
        let mut s = vec![[0.0f64; 3]; j];
        for (i, u) in slice.units().iter().enumerate() {
            let p = self.declaration_probability(&u.summary);
            let sigma2 = self.variances[i];
            s.iter_mut().for_each(|v| *v = [0.0; 3]);
            for _ in 0..draws_per_unit {
                let x = draw_covariates(&mut rng, self.config.covariate_dim);
                let star = self.theta_star(&x, &u.summary);
                for (acc, snap) in s.iter_mut().zip(snapshots) {
                    let d = star - snap.predict_features(&x, &u.summary)?;
                    let d2 = d * d;
                    acc[0] += d;
                    acc[1] += d2;
                    acc[2] += d2 * d2;
                }
            }
            for k in 0..j {
                let (m1, m2, m4) = (s[k][0] / m, s[k][1] / m, s[k][2] / m);
                let mean = p * m2;
                risk[k] += mean;
                se2[k] += p * p * (m4 - m2 * m2).max(0.0) / m;
                unit_var[k] += (p * (m4 + 4.0 * sigma2 * m2) - mean * mean).max(0.0);
                let q = p * m1;
                diag_cov[k] += 4.0 * q * q * sigma2;
                for &(src, l) in &self.loadings[i] {
                    loads[k][src] += l * q;
                }
            }
        }
        let nf = n as f64;
        Ok((0..j)
            .map(|k| {
                let cross: f64 = loads[k].iter().map(|v| v * v).sum::<f64>() * 4.0 / 3.0;
                GapMoments {
                    risk_gap: risk[k] / nf,
                    risk_gap_se: sqrt0(se2[k]) / nf,
                    unit_variance: unit_var[k] / nf,
                    average_variance: ((unit_var[k] + cross - diag_cov[k]) / (nf * nf)).max(0.0),
                }
            })
            .collect())
    }

    /// Semi-analytic conditional risk: Monte Carlo over covariates only.
    pub fn conditional_risk(
        &self,
        snapshot: &PredictorSnapshot,
        slice: &TimeSlice,
        draws_per_unit: usize,
        seed_value: u64,
    ) -> Result<RiskEstimate> {
        let g = self.gap_moments(&[snapshot], slice, draws_per_unit, seed_value)?[0];
        Ok(RiskEstimate {
            value: g.risk_gap + self.star_risk(slice)?,
            standard_error: g.risk_gap_se,
        })
    }

    /// Plain Monte Carlo conditional risk: `samples` fresh slices with the
    /// summaries of `slice` held fixed.
    pub fn conditional_risk_mc(
        &self,
        snapshot: &PredictorSnapshot,
        slice: &TimeSlice,
        samples: usize,
        seed_value: u64,
    ) -> Result<RiskEstimate> {
        self.check_slice(slice)?;
        if samples < 2 {
            return Err(Error::InvalidParameters("need at least two samples".into()));
        }
        let mut rng = seed::rng(seed_value);
        let mut sources = Vec::new();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            draw_sources(&mut rng, self.sources, &mut sources);
            let mut total = 0.0;
            for (i, u) in slice.units().iter().enumerate() {
                let x = draw_covariates(&mut rng, self.config.covariate_dim);
                let w = rng.random::<f64>() < self.declaration_probability(&u.summary);
                if w {
                    let y = self.theta_star(&x, &u.summary) + noise(&self.loadings[i], &sources);
                    let r = y - snapshot.predict_features(&x, &u.summary)?;
                    total += r * r;
                }
            }
            let l = total / slice.len() as f64;
            sum += l;
            sum_sq += l * l;
        }
        let s = samples as f64;
        let mean = sum / s;
        let var = ((sum_sq - s * mean * mean) / (s - 1.0)).max(0.0);
        Ok(RiskEstimate {
            value: mean,
            standard_error: sqrt0(var / s),
        })
    }
}

fn sqrt0(v: f64) -> f64 {
    libm::sqrt(v.max(0.0))
}

/// Oracle pick `j_tilde_t` from per-time gap moments (`per_time[tau][j]` for
/// the snapshot fit at `tau`) and per-time risks of `theta*`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSelection {
    pub index: usize,
    /// `R_tilde_{j,t}`.
    pub risks: Vec<f64>,
    /// `R_tilde_{j,t} - R_tilde_t(theta*)`.
    pub excess: Vec<f64>,
    pub star_risk: f64,
}

pub fn oracle_select(per_time: &[Vec<GapMoments>], star_terms: &[f64], t: usize) -> Result<OracleSelection> {
    if t == 0 || per_time.len() < t || star_terms.len() < t {
        return Err(Error::IncompleteTrajectory(format!(
            "need {t} time steps, have {} gap rows and {} star terms",
            per_time.len(),
            star_terms.len()
        )));
    }
    let j = per_time[0].len();
    if j == 0 || per_time[..t].iter().any(|r| r.len() != j) {
        return Err(Error::IncompleteTrajectory("ragged learner rows".into()));
    }
    let tf = t as f64;
    let star_risk = star_terms[..t].iter().sum::<f64>() / tf;
    let risks: Vec<f64> = (0..j)
        .map(|k| per_time[..t].iter().map(|r| r[k].risk_gap).sum::<f64>() / tf + star_risk)
        .collect();
    let index = crate::ensemble::discrete_select(&risks)?;
    let excess = risks.iter().map(|r| r - star_risk).collect();
    Ok(OracleSelection {
        index,
        risks,
        excess,
        star_risk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{generate, Declaration};

    #[test]
    fn star_has_zero_gap() {
        let c = DgpConfig {
            unit_count: 50,
            horizon: 1,
            ..DgpConfig::default()
        };
        let (panel, _, oracle) = generate(&c).unwrap();
        let star = oracle.star_predictor("star", 0).unwrap();
        let g = oracle.gap_moments(&[&star], panel.slice(1).unwrap(), 5, 1).unwrap()[0];
        assert!(g.risk_gap.abs() < 1e-24);
        assert!(g.average_variance.abs() < 1e-24);
    }

    #[test]
    fn zero_predictor_on_constant_truth() {
        let c = DgpConfig {
            unit_count: 10,
            horizon: 1,
            truth_coefficients: vec![0.4, 0.0, 0.0, 0.0],
            declaration: Declaration::Constant { probability: 1.0 },
            shared_noise: 0.0,
            idiosyncratic_noise: 0.0,
            ..DgpConfig::default()
        };
        let (panel, _, oracle) = generate(&c).unwrap();
        let zero = PredictorSnapshot::constant("z", 0, 0.0, 1.0);
        let r = oracle.conditional_risk(&zero, panel.slice(1).unwrap(), 3, 9).unwrap();
        assert!((r.value - 0.16).abs() < 1e-15);
    }
}
