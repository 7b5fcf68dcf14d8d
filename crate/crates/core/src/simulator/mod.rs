//! A panel data-generating process with a known regression function, bounded
//! uniform noise shared within cliques (or lattice neighbourhoods), and an
//! oracle for conditional risks.
//!
//! At every time step and for every unit: covariates `X ~ U[0,1]^q`, summary
//! `Z` = `p` sorted `U[0,1]` draws, `W ~ Bernoulli(pi(Z))`, and
//! `Y = W (theta*(X, Z) + e)` where `e` is a fixed linear combination of
//! independent `U[-1,1]` sources. Two units share a source exactly when they
//! are adjacent in the dependency graph.

mod audit;
mod oracle;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bounds;
use crate::data::{PanelDataset, TimeSlice, UnitId, UnitObservation};
use crate::graph::{degree_plus_one, DependencyGraph};
use crate::{seed, Error, Result};

pub use audit::{empirical_assumption_audit, random_test_predictors, AssumptionCheck, AuditConfig, AuditReport};
pub use oracle::{oracle_select, GapMoments, OracleHandle, OracleSelection, RiskEstimate};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)
)]
pub enum GraphKind {
    DisjointCliques { size: usize },
    LatticeRadius { radius: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TruthKind {
    /// `c0 + sum_i c_i v_i`
    Linear,
    /// `c0 + sum_i c_i 1{v_i > 1/2}`
    Piecewise,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)
)]
pub enum Declaration {
    Constant { probability: f64 },
    /// `1 / (1 + exp(-(intercept + slopes . z)))`
    Logistic { intercept: f64, slopes: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct DgpConfig {
    pub unit_count: usize,
    pub graph: GraphKind,
    pub horizon: usize,
    pub outcome_bound: f64,
    pub covariate_dim: usize,
    pub summary_dim: usize,
    pub truth: TruthKind,
    /// Intercept, then one coefficient per covariate, then per summary entry.
    pub truth_coefficients: Vec<f64>,
    pub declaration: Declaration,
    /// Amplitude of the shared noise component.
    pub shared_noise: f64,
    /// Amplitude of the unit-specific noise component.
    pub idiosyncratic_noise: f64,
    /// Not serialized: experiments carry one master seed of their own.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            unit_count: 500,
            graph: GraphKind::DisjointCliques { size: 5 },
            horizon: 10,
            outcome_bound: 1.0,
            covariate_dim: 2,
            summary_dim: 1,
            truth: TruthKind::Linear,
            truth_coefficients: vec![0.2, 0.3, 0.2, 0.1],
            declaration: Declaration::Logistic {
                intercept: -0.5,
                slopes: vec![1.5],
            },
            shared_noise: 0.1,
            idiosyncratic_noise: 0.1,
            seed: 20_240_601,
        }
    }
}

/// A-priori constants of the simulated loss class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatorConstants {
    pub b1: f64,
    pub b2: f64,
    pub v1: f64,
    pub beta: f64,
    pub gamma: f64,
    pub degree: usize,
    pub ratio: f64,
}

impl DgpConfig {
    pub fn noise_amplitude(&self) -> f64 {
        self.shared_noise + self.idiosyncratic_noise
    }

    /// Range of `theta*` over the covariate/summary box `[0,1]^(q+p)`.
    pub fn truth_range(&self) -> (f64, f64) {
        let c = &self.truth_coefficients;
        let (mut lo, mut hi) = (c[0], c[0]);
        for &ci in &c[1..] {
            lo += ci.min(0.0);
            hi += ci.max(0.0);
        }
        (lo, hi)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.unit_count == 0 {
            return bad("unit_count must be positive".into());
        }
        if self.unit_count > 99_999 {
            return bad("unit_count must be below 100000".into());
        }
        match self.graph {
            GraphKind::DisjointCliques { size } => {
                if size == 0 || self.unit_count % size != 0 {
                    return bad(format!(
                        "clique size {size} does not divide unit_count {}",
                        self.unit_count
                    ));
                }
            }
            GraphKind::LatticeRadius { .. } => {}
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(self.outcome_bound.is_finite() && self.outcome_bound > 0.0) {
            return bad(format!("outcome_bound {} must be positive", self.outcome_bound));
        }
        let dim = 1 + self.covariate_dim + self.summary_dim;
        if self.truth_coefficients.len() != dim {
            return bad(format!(
                "truth_coefficients has {} entries, expected 1 + {} + {} = {dim}",
                self.truth_coefficients.len(),
                self.covariate_dim,
                self.summary_dim
            ));
        }
        if self.truth_coefficients.iter().any(|c| !c.is_finite()) {
            return bad("non-finite truth coefficient".into());
        }
        match &self.declaration {
            Declaration::Constant { probability } => {
                if !(0.0..=1.0).contains(probability) {
                    return bad(format!("declaration probability {probability} outside [0, 1]"));
                }
            }
            Declaration::Logistic { intercept, slopes } => {
                if slopes.len() != self.summary_dim {
                    return bad(format!(
                        "declaration slopes has {} entries, expected summary_dim = {}",
                        slopes.len(),
                        self.summary_dim
                    ));
                }
                if !intercept.is_finite() || slopes.iter().any(|s| !s.is_finite()) {
                    return bad("non-finite declaration parameter".into());
                }
            }
        }
        let (s_c, s_i) = (self.shared_noise, self.idiosyncratic_noise);
        if !(s_c >= 0.0 && s_i >= 0.0 && s_c.is_finite() && s_i.is_finite()) {
            return bad("noise amplitudes must be finite and nonnegative".into());
        }
        let (lo, hi) = self.truth_range();
        let s = self.noise_amplitude();
        if lo - s < 0.0 || hi + s > self.outcome_bound {
            return bad(format!(
                "theta* ranges over [{lo}, {hi}]; with noise amplitude {s} outcomes leave [0, {}]",
                self.outcome_bound
            ));
        }
        Ok(())
    }

    pub fn unit_ids(&self) -> Vec<UnitId> {
        (0..self.unit_count).map(|i| UnitId(format!("u{i:05}"))).collect()
    }

    pub fn graph(&self) -> Result<DependencyGraph> {
        let ids = self.unit_ids();
        match self.graph {
            GraphKind::DisjointCliques { size } => DependencyGraph::disjoint_cliques(ids, size),
            GraphKind::LatticeRadius { radius } => DependencyGraph::ring_lattice(ids, radius),
        }
    }

    /// `b1 = B^2`, `b2 = B^2 + s^2`, `v1 = ((B^2 + s^2) / 2)^2`, `beta = 1`,
    /// `gamma = 32 B^2`, where `s` is the total noise amplitude.
    ///
    /// With `W = 1` the loss gap is `d^2 + 2 e d = (d + e)^2 - e^2` with
    /// `d = theta* - theta`, which lies in `[-s^2, B^2]`, and its conditional
    /// mean lies in `[0, B^2]`.
    pub fn constants(&self) -> Result<SimulatorConstants> {
        self.validate()?;
        let b = self.outcome_bound;
        let s = self.noise_amplitude();
        let degree = degree_plus_one(&self.graph()?)?;
        let (a1, a2) = bounds::least_squares_constants(b);
        Ok(SimulatorConstants {
            b1: b * b,
            b2: b * b + s * s,
            v1: libm::pow((b * b + s * s) / 2.0, 2.0),
            beta: 1.0,
            gamma: bounds::strong_convexity_gamma(a1, a2)?,
            degree,
            ratio: self.unit_count as f64 / degree as f64,
        })
    }

    pub(crate) fn theta_star(&self, x: &[f64], z: &[f64]) -> f64 {
        let c = &self.truth_coefficients;
        let v = x.iter().chain(z);
        match self.truth {
            TruthKind::Linear => c[0] + v.zip(&c[1..]).map(|(a, b)| a * b).sum::<f64>(),
            TruthKind::Piecewise => {
                c[0] + v
                    .zip(&c[1..])
                    .map(|(a, b)| if *a > 0.5 { *b } else { 0.0 })
                    .sum::<f64>()
            }
        }
    }

    pub(crate) fn declaration_probability(&self, z: &[f64]) -> f64 {
        match &self.declaration {
            Declaration::Constant { probability } => *probability,
            Declaration::Logistic { intercept, slopes } => {
                let eta = intercept + z.iter().zip(slopes).map(|(a, b)| a * b).sum::<f64>();
                1.0 / (1.0 + libm::exp(-eta))
            }
        }
    }

    /// Noise loadings: unit `i` gets `e_i = sum_k L[i][k] S_k` with
    /// independent `S_k ~ U[-1, 1]`.
    pub(crate) fn noise_loadings(&self) -> (Vec<Vec<(usize, f64)>>, usize) {
        let n = self.unit_count;
        let (mut loadings, shared_sources) = match self.graph {
            GraphKind::DisjointCliques { size } => (
                (0..n)
                    .map(|i| vec![(i / size, self.shared_noise)])
                    .collect::<Vec<_>>(),
                n / size,
            ),
            GraphKind::LatticeRadius { radius } => {
                // unit i averages the sites i, ..., i + radius (circularly), so
                // two units share a site iff their circular distance is at most
                // the radius
                let w = self.shared_noise / (radius + 1) as f64;
                let rows = (0..n)
                    .map(|i| {
                        let mut row: Vec<(usize, f64)> = Vec::new();
                        for k in 0..=radius {
                            let site = (i + k) % n;
                            match row.iter_mut().find(|(s, _)| *s == site) {
                                Some(e) => e.1 += w,
                                None => row.push((site, w)),
                            }
                        }
                        row
                    })
                    .collect();
                (rows, n)
            }
        };
        if self.shared_noise == 0.0 {
            loadings.iter_mut().for_each(Vec::clear);
        }
        if self.idiosyncratic_noise > 0.0 {
            for (i, row) in loadings.iter_mut().enumerate() {
                row.push((shared_sources + i, self.idiosyncratic_noise));
            }
        }
        (loadings, shared_sources + n)
    }
}

pub(crate) fn draw_summary(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    let mut z: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
    z.sort_by(f64::total_cmp);
    z
}

pub(crate) fn draw_covariates(rng: &mut ChaCha8Rng, q: usize) -> Vec<f64> {
    (0..q).map(|_| rng.random::<f64>()).collect()
}

pub(crate) fn draw_sources(rng: &mut ChaCha8Rng, count: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..count).map(|_| 2.0 * rng.random::<f64>() - 1.0));
}

pub(crate) fn noise(loadings: &[(usize, f64)], sources: &[f64]) -> f64 {
    loadings.iter().map(|&(k, l)| l * sources[k]).sum()
}

/// Simulates a panel together with its dependency graph and oracle.
pub fn generate(config: &DgpConfig) -> Result<(PanelDataset, DependencyGraph, OracleHandle)> {
    config.validate()?;
    let graph = config.graph()?;
    let oracle = OracleHandle::new(config.clone())?;
    let ids = config.unit_ids();
    let mut rng = seed::rng(seed::substream(config.seed, 1));
    let mut sources = Vec::new();
    let mut slices = Vec::with_capacity(config.horizon);
    for t in 1..=config.horizon {
        let mut units = Vec::with_capacity(config.unit_count);
        let mut draws = Vec::with_capacity(config.unit_count);
        for _ in 0..config.unit_count {
            let x = draw_covariates(&mut rng, config.covariate_dim);
            let z = draw_summary(&mut rng, config.summary_dim);
            let w = rng.random::<f64>() < config.declaration_probability(&z);
            draws.push((x, z, w));
        }
        draw_sources(&mut rng, oracle.source_count(), &mut sources);
        for (i, (x, z, w)) in draws.into_iter().enumerate() {
            let y = if w {
                config.theta_star(&x, &z) + noise(oracle.loadings(i), &sources)
            } else {
                0.0
            };
            assert!(
                (0.0..=config.outcome_bound).contains(&y),
                "simulated outcome {y} outside [0, {}]",
                config.outcome_bound
            );
            units.push(UnitObservation::new(ids[i].clone(), w, x, z, y)?);
        }
        slices.push(TimeSlice::new(t, units)?);
    }
    let panel = PanelDataset::new(slices, config.outcome_bound)?;
    Ok((panel, graph, oracle))
}
