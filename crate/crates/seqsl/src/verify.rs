//! Monte Carlo replays of the whole pipeline, compared against the bounds.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use rand::Rng;
use rayon::prelude::*;
use seqsl_core::bounds::{self, BoundKind, BoundParameters, BoundValue};
use seqsl_core::data::TimeSlice;
use seqsl_core::learners::PredictorSnapshot;
use seqsl_core::seed;
use seqsl_core::simulator::{
    empirical_assumption_audit, generate, oracle_select, random_test_predictors, AuditConfig,
    AuditReport, DgpConfig, GapMoments, GraphKind, OracleHandle, TruthKind,
};

use crate::commands::ensemble_state;
use crate::config::ExperimentConfig;
use crate::csvio::{self, real};
use crate::manifest::Manifest;

/// Normal quantile of the two-sided 95% Wilson interval.
pub const WILSON_Z: f64 = 1.96;
/// Cells whose Wilson half-width exceeds this are flagged low-power and left
/// out of the failure tally.
pub const LOW_POWER: f64 = 0.1;
/// Slack of the dominance comparison between combined and discrete risks.
pub const DOMINANCE_TOL: f64 = 1e-8;

/// Observables of one replication at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeRecord {
    pub t: usize,
    pub j_hat: usize,
    pub j_tilde: usize,
    /// `R_hat_{j,t}`.
    pub empirical_risks: Vec<f64>,
    /// `R_tilde_{j,t}`.
    pub oracle_risks: Vec<f64>,
    /// `R_hat_t(theta*)`.
    pub star_empirical: f64,
    /// `R_tilde_t(theta*)`.
    pub star_risk: f64,
    pub excess_sl: f64,
    pub excess_oracle: f64,
    /// Largest Monte Carlo standard error among the oracle risks.
    pub oracle_se: f64,
    /// `H_hat_{j,t}`.
    pub h_hat: Vec<f64>,
    /// `H_tilde_{j,t}`.
    pub h_tilde: Vec<f64>,
    /// `max_{tau <= t} var_{j,tau}`.
    pub max_unit_var: Vec<f64>,
    /// `var_tilde_{j,t}`: time average of the variance of the unit-averaged gap.
    pub tilde_var: Vec<f64>,
    /// Conditional excess risk at time `t` alone of each scored snapshot.
    pub instant_gap: Vec<f64>,
    /// Empirical risk of the meta-learner's combination.
    pub combined_risk: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub index: usize,
    pub seed: u64,
    pub times: Vec<TimeRecord>,
}

impl ReplicationResult {
    pub fn at(&self, t: usize) -> &TimeRecord {
        &self.times[t - 1]
    }
}

/// Replication seeds: explicit ones from the config, else split from the
/// master seed.
pub fn replication_seeds(config: &ExperimentConfig) -> Vec<u64> {
    match &config.verify.replication_seeds {
        Some(s) => s.clone(),
        None => (0..config.replications as u64)
            .map(|r| seed::replication_seed(config.seed, r))
            .collect(),
    }
}

/// One end-to-end run: simulate, step the ensemble through every time and
/// compute the oracle quantities.
pub fn run_one(config: &ExperimentConfig, index: usize, rep_seed: u64) -> Result<ReplicationResult> {
    let inner = || -> Result<ReplicationResult> {
        let dgp = DgpConfig {
            seed: rep_seed,
            ..config.dgp.clone()
        };
        let (panel, _graph, oracle) = generate(&dgp)?;
        let method = config.ensemble.methods[0];
        let mut state = ensemble_state(config, method, dgp.outcome_bound, rep_seed)?;
        let j = config.learners.len();
        let mut per_time: Vec<Vec<GapMoments>> = Vec::new();
        let mut star_terms = Vec::new();
        let mut star_emp_sum = 0.0;
        let mut max_unit_var = vec![0.0f64; j];
        let mut avg_var_sum = vec![0.0; j];
        let mut times = Vec::new();
        for slice in panel.slices() {
            let t = slice.time_index();
            let gaps = {
                let snaps: Vec<&PredictorSnapshot> = state.snapshots().iter().map(|s| &**s).collect();
                oracle.gap_moments(
                    &snaps,
                    slice,
                    config.verify.draws_per_unit,
                    seed::substream(rep_seed, 100 + t as u64),
                )?
            };
            star_terms.push(oracle.star_risk(slice)?);
            star_emp_sum += oracle.star_empirical_loss(slice)?;
            for (k, g) in gaps.iter().enumerate() {
                max_unit_var[k] = max_unit_var[k].max(g.unit_variance);
                avg_var_sum[k] += g.average_variance;
            }
            let oracle_se = gaps.iter().map(|g| g.risk_gap_se).fold(0.0, f64::max);
            let instant_gap = gaps.iter().map(|g| g.risk_gap).collect();
            per_time.push(gaps);
            state = state.advance(slice.clone())?;
            let rec = state.records().last().expect("a record per step");
            let sel = oracle_select(&per_time, &star_terms, t)?;
            let star_empirical = star_emp_sum / t as f64;
            times.push(TimeRecord {
                t,
                j_hat: rec.selected,
                j_tilde: sel.index,
                empirical_risks: rec.empirical_risks.clone(),
                star_empirical,
                star_risk: sel.star_risk,
                excess_sl: sel.excess[rec.selected],
                excess_oracle: sel.excess[sel.index],
                oracle_se,
                h_hat: rec.empirical_risks.iter().map(|r| r - star_empirical).collect(),
                h_tilde: sel.excess.clone(),
                max_unit_var: max_unit_var.clone(),
                tilde_var: avg_var_sum.iter().map(|v| v / t as f64).collect(),
                instant_gap,
                combined_risk: rec.combined_risk,
                weights: rec.weights.clone(),
                oracle_risks: sel.risks,
            });
        }
        Ok(ReplicationResult {
            index,
            seed: rep_seed,
            times,
        })
    };
    inner().with_context(|| format!("replication {index} (seed {rep_seed}) failed"))
}

/// Runs every replication in parallel; results are ordered by index.
pub fn run_replications(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<ReplicationResult>> {
    if seeds.is_empty() {
        return Err(anyhow!("need at least one replication"));
    }
    seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| run_one(config, i, s))
        .collect()
}

/// Wilson score interval half-width for `k` successes in `n` trials.
pub fn wilson_half_width(k: usize, n: usize) -> f64 {
    let (n, p) = (n as f64, k as f64 / n as f64);
    let z2 = WILSON_Z * WILSON_Z;
    WILSON_Z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.max(lo).ln());
    (0..points)
        .map(|i| {
            if i + 1 == points {
                hi.max(lo)
            } else if i == 0 {
                lo
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Vacuous,
    LowPower,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Vacuous => "VACUOUS",
            Status::LowPower => "LOW-POWER",
        }
    }

    fn judge(frequency: f64, bound: BoundValue, half_width: f64) -> Self {
        if bound.vacuous {
            Status::Vacuous
        } else if frequency <= bound.capped + half_width {
            Status::Pass
        } else if half_width > LOW_POWER {
            Status::LowPower
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub pass: usize,
    pub fail: usize,
    pub vacuous: usize,
    pub low_power: usize,
}

impl Tally {
    fn add(&mut self, s: Status) {
        match s {
            Status::Pass => self.pass += 1,
            Status::Fail => self.fail += 1,
            Status::Vacuous => self.vacuous += 1,
            Status::LowPower => self.low_power += 1,
        }
    }

    fn line(&self) -> String {
        format!(
            "pass {} / vacuous {} / low-power {} / fail {}",
            self.pass, self.vacuous, self.low_power, self.fail
        )
    }
}

/// `params` with `t` replaced and the minimal admissible `N`, `N'` for it.
pub fn params_at(base: &BoundParameters, t: usize) -> Result<BoundParameters> {
    let mut p = BoundParameters { t, ..*base };
    p.n = bounds::minimal_n(&p)?;
    p.n_prime = bounds::minimal_n_prime(&p);
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailCell {
    pub x: f64,
    pub frequency: f64,
    pub time_bound: Option<BoundValue>,
    pub graph_bound: Option<BoundValue>,
    pub bound: BoundValue,
    pub half_width: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub t: usize,
    pub replications: usize,
    pub regime: &'static str,
    pub cells: Vec<TailCell>,
    pub tally: Tally,
}

/// Frequency of `excess_SL >= (1 + 2a) excess_oracle + x` against the
/// smaller of the two high-probability bounds at each valid `x`.
pub fn tail_check(results: &[ReplicationResult], params: &BoundParameters, x_points: usize) -> Result<TailReport> {
    let t = params.t;
    let c = bounds::theorem1_constants(params)?;
    let gaps: Vec<f64> = results
        .iter()
        .map(|r| {
            let rec = r.at(t);
            rec.excess_sl - (1.0 + 2.0 * params.a) * rec.excess_oracle
        })
        .collect();
    let lo = c.x_lower.min(c.x_lower_prime);
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    let hi = (1.5 * max_gap).max(10.0 * lo);
    let n = gaps.len();
    let mut cells = Vec::new();
    let mut tally = Tally::default();
    for x in log_grid(lo, hi, x_points) {
        let time_bound = bounds::theorem1_tail_bound(params, x, BoundKind::Time).ok();
        let graph_bound = bounds::theorem1_tail_bound(params, x, BoundKind::Graph).ok();
        let raw = [time_bound, graph_bound]
            .iter()
            .flatten()
            .map(|b| b.raw)
            .fold(f64::INFINITY, f64::min);
        let bound = BoundValue::new(raw);
        let k = gaps.iter().filter(|&&g| g >= x).count();
        let half_width = wilson_half_width(k, n);
        let frequency = k as f64 / n as f64;
        let status = Status::judge(frequency, bound, half_width);
        tally.add(status);
        cells.push(TailCell {
            x,
            frequency,
            time_bound,
            graph_bound,
            bound,
            half_width,
            status,
        });
    }
    Ok(TailReport {
        t,
        replications: n,
        regime: bounds::regime_compare(params)?.verdict.name(),
        cells,
        tally,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationRow {
    pub t: usize,
    pub kind: BoundKind,
    pub mean: f64,
    pub standard_error: f64,
    pub n: u64,
    pub bound: f64,
    pub pass: bool,
}

/// Mean of `excess_SL - (1 + 2a) excess_oracle` against both expected-risk
/// bounds; `params` must carry admissible `N` and `N'`.
pub fn expectation_check(results: &[ReplicationResult], params: &BoundParameters) -> Result<Vec<ExpectationRow>> {
    let t = params.t;
    let v: Vec<f64> = results
        .iter()
        .map(|r| r.at(t).excess_sl - (1.0 + 2.0 * params.a) * r.at(t).excess_oracle)
        .collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let se = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    [BoundKind::Time, BoundKind::Graph]
        .into_iter()
        .map(|kind| {
            let b = bounds::corollary_bound(params, kind)?;
            Ok(ExpectationRow {
                t,
                kind,
                mean,
                standard_error: se,
                n: match kind {
                    BoundKind::Time => params.n,
                    BoundKind::Graph => params.n_prime,
                },
                bound: b.value,
                pass: mean <= b.value + 2.0 * se,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinCell {
    pub t: usize,
    pub learner: usize,
    pub x: f64,
    pub frequency: f64,
    pub bound: BoundValue,
    pub half_width: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub t: usize,
    pub learner: usize,
    pub worst: f64,
    pub v2: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinReport {
    pub v: f64,
    pub cells: Vec<BernsteinCell>,
    pub variance: Vec<VarianceRow>,
    pub tally: Tally,
}

impl BernsteinReport {
    pub fn variance_violations(&self) -> usize {
        self.variance.iter().map(|r| r.violations).sum()
    }
}

/// Frequency of `|H_hat - H_tilde| >= x` jointly with `max var <= V`, per
/// learner and time, against the Bernstein-type bound; also counts
/// `var_tilde > v2`.
pub fn bernstein_check(
    results: &[ReplicationResult],
    params: &BoundParameters,
    v: f64,
    times: &[usize],
    x_points: usize,
) -> Result<BernsteinReport> {
    let v2 = params.v2()?;
    let j = results[0].times[0].h_hat.len();
    let n = results.len();
    // where the bound drops below 1: ratio x^2 = 2 (32 e^2 V + 15 e b2 x)
    let e = std::f64::consts::E;
    let (qa, qb, qc) = (params.ratio, -30.0 * e * params.b2, -64.0 * e * e * v);
    let x_one = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
    let mut cells = Vec::new();
    let mut tally = Tally::default();
    let mut variance = Vec::new();
    for &t in times {
        for k in 0..j {
            let dev: Vec<(f64, bool)> = results
                .iter()
                .map(|r| {
                    let rec = r.at(t);
                    ((rec.h_hat[k] - rec.h_tilde[k]).abs(), rec.max_unit_var[k] <= v)
                })
                .collect();
            let max_dev = dev.iter().map(|d| d.0).fold(0.0, f64::max);
            let hi = (1.5 * max_dev).max(2.0 * x_one);
            let lo = (hi * 1e-3).min(x_one / 4.0);
            for x in log_grid(lo, hi, x_points) {
                let bound = bounds::theorem2_tail_bound(params.ratio, v, params.b2, x)?;
                let hits = dev.iter().filter(|(d, ok)| *ok && *d >= x).count();
                let half_width = wilson_half_width(hits, n);
                let frequency = hits as f64 / n as f64;
                let status = Status::judge(frequency, bound, half_width);
                tally.add(status);
                cells.push(BernsteinCell {
                    t,
                    learner: k,
                    x,
                    frequency,
                    bound,
                    half_width,
                    status,
                });
            }
        }
    }
    let horizon = results[0].times.len();
    for t in 1..=horizon {
        for k in 0..j {
            let vals = results.iter().map(|r| r.at(t).tilde_var[k]);
            let worst = vals.clone().fold(0.0, f64::max);
            variance.push(VarianceRow {
                t,
                learner: k,
                worst,
                v2,
                violations: vals.filter(|&w| w > v2).count(),
            });
        }
    }
    Ok(BernsteinReport {
        v,
        cells,
        variance,
        tally,
    })
}

/// Exact moments of a fixed constant predictor's loss gap at one unit, for a
/// linear truth with uniform covariates: `(E[Delta | z], Var[Delta | z])`.
fn constant_gap_moments(oracle: &OracleHandle, unit: usize, z: &[f64], c: f64) -> (f64, f64) {
    let cfg = oracle.config();
    let coef = &cfg.truth_coefficients;
    let q = cfg.covariate_dim;
    let xs = &coef[1..=q];
    let mean_x: f64 = xs.iter().map(|b| b / 2.0).sum();
    let zpart: f64 = z.iter().zip(&coef[q + 1..]).map(|(a, b)| a * b).sum();
    let m = coef[0] + mean_x + zpart - c;
    let s2: f64 = xs.iter().map(|b| b * b / 12.0).sum();
    let s4: f64 = xs.iter().map(|b| b.powi(4) / 80.0).sum();
    let cross: f64 = s2 * s2 - xs.iter().map(|b| (b * b / 12.0).powi(2)).sum::<f64>();
    let e_d2 = m * m + s2;
    let e_d4 = m.powi(4) + 6.0 * m * m * s2 + s4 + 3.0 * cross;
    let p = oracle.declaration_probability(z);
    let sigma2 = oracle.noise_variance(unit);
    let mean = p * e_d2;
    (mean, p * (e_d4 + 4.0 * sigma2 * e_d2) - mean * mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JansonCell {
    pub x: f64,
    pub frequency: f64,
    pub bound: f64,
    pub half_width: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JansonReport {
    pub label: String,
    pub degree: usize,
    pub units: usize,
    pub draws: usize,
    /// Mean of the unit variances.
    pub v: f64,
    pub b: f64,
    pub empirical_sd: f64,
    pub cells: Vec<JansonCell>,
    pub tally: Tally,
    /// The centered draws, sorted.
    pub sample: Vec<f64>,
}

impl JansonReport {
    pub fn frequency_at(&self, x: f64) -> f64 {
        let below = self.sample.partition_point(|&s| s < x);
        (self.sample.len() - below) as f64 / self.sample.len() as f64
    }
}

/// Draws of `mean_alpha Delta_alpha - E[. | Z]` for the constant predictor
/// `c`, with the summaries of `slice` held fixed.
fn janson_draws(oracle: &OracleHandle, slice: &TimeSlice, c: f64, center: f64, draws: usize, seed_value: u64) -> Vec<f64> {
    const CHUNK: usize = 1024;
    let cfg = oracle.config();
    let units = slice.units();
    let n = units.len() as f64;
    let chunks = draws.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|ci| {
            let mut rng = seed::rng(seed::substream(seed_value, ci as u64));
            let count = CHUNK.min(draws - ci * CHUNK);
            let mut sources = vec![0.0; oracle.source_count()];
            let mut x = vec![0.0; cfg.covariate_dim];
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                sources.iter_mut().for_each(|s| *s = 2.0 * rng.random::<f64>() - 1.0);
                let mut total = 0.0;
                for (i, u) in units.iter().enumerate() {
                    x.iter_mut().for_each(|v| *v = rng.random::<f64>());
                    let declared = rng.random::<f64>() < oracle.declaration_probability(&u.summary);
                    if declared {
                        let star = oracle.theta_star(&x, &u.summary);
                        let e: f64 = oracle.loadings(i).iter().map(|&(k, l)| l * sources[k]).sum();
                        let d = star - c;
                        total += d * d + 2.0 * e * d;
                    }
                }
                out.push(total / n - center);
            }
            out
        })
        .collect()
}

/// Single-slice tail of the centered unit-average of a fixed predictor's loss
/// gaps against the dependency-graph bound.
pub fn janson_empirical_check(dgp: &DgpConfig, label: &str, draws: usize, x_points: usize) -> Result<JansonReport> {
    let (panel, graph, oracle) = generate(dgp)?;
    let slice = &panel.slices()[0];
    let b_out = dgp.outcome_bound;
    let c = b_out / 4.0;
    let constants = dgp.constants()?;
    let (center, v) = match dgp.truth {
        TruthKind::Linear => {
            let (mut m, mut v) = (0.0, 0.0);
            for (i, u) in slice.units().iter().enumerate() {
                let (a, b) = constant_gap_moments(&oracle, i, &u.summary, c);
                m += a;
                v += b;
            }
            let n = slice.len() as f64;
            (m / n, v / n)
        }
        TruthKind::Piecewise => {
            let snap = PredictorSnapshot::constant("c", 0, c, b_out);
            let g = oracle.gap_moments(&[&snap], slice, 2000, seed::substream(dgp.seed, 7))?[0];
            (g.risk_gap, g.unit_variance)
        }
    };
    let deg = seqsl_core::graph::degree_plus_one(&graph)?;
    let b = constants.b2;
    let mut sample = janson_draws(&oracle, slice, c, center, draws, seed::substream(dgp.seed, 8));
    sample.sort_by(f64::total_cmp);
    let m = sample.len() as f64;
    let sd = (sample.iter().map(|s| s * s).sum::<f64>() / m).sqrt();
    let hi = (6.0 * sd).max(sample.iter().copied().fold(0.0, f64::max) * 1.5);
    let mut xs = vec![0.0];
    xs.extend(log_grid(sd / 10.0, hi, x_points.max(2) - 1));
    let mut cells = Vec::new();
    let mut tally = Tally::default();
    for x in xs {
        let bound = bounds::janson_bound(slice.len(), deg, v, b, x)?;
        let k = sample.iter().filter(|&&s| s >= x).count();
        let frequency = k as f64 / m;
        let half_width = wilson_half_width(k, sample.len());
        let status = Status::judge(frequency, BoundValue::new(bound), half_width);
        tally.add(status);
        cells.push(JansonCell {
            x,
            frequency,
            bound,
            half_width,
            status,
        });
    }
    Ok(JansonReport {
        label: label.into(),
        degree: deg,
        units: slice.len(),
        draws,
        v,
        b,
        empirical_sd: sd,
        cells,
        tally,
        sample,
    })
}

/// Directional comparison of two clique sizes at a fixed unit count: the
/// bound and the empirical tail at a common `x` should both grow with size.
#[derive(Debug, Clone, PartialEq)]
pub struct JansonDirection {
    pub small: JansonReport,
    pub large: JansonReport,
    pub x: f64,
    pub frequency_small: f64,
    pub frequency_large: f64,
    pub bound_small: f64,
    pub bound_large: f64,
}

impl JansonDirection {
    pub fn agrees(&self) -> bool {
        self.bound_large >= self.bound_small && self.frequency_large >= self.frequency_small
    }
}

pub fn janson_direction(dgp: &DgpConfig, small: usize, large: usize, draws: usize, x_points: usize) -> Result<JansonDirection> {
    let with = |size| DgpConfig {
        graph: GraphKind::DisjointCliques { size },
        ..dgp.clone()
    };
    let s = janson_empirical_check(&with(small), &format!("cliques-{small}"), draws, x_points)?;
    let l = janson_empirical_check(&with(large), &format!("cliques-{large}"), draws, x_points)?;
    // two standard deviations of the smaller configuration
    let x = 2.0 * s.empirical_sd;
    Ok(JansonDirection {
        x,
        frequency_small: s.frequency_at(x),
        frequency_large: l.frequency_at(x),
        bound_small: bounds::janson_bound(s.units, s.degree, s.v, s.b, x)?,
        bound_large: bounds::janson_bound(l.units, l.degree, l.v, l.b, x)?,
        small: s,
        large: l,
    })
}

/// Argmin, dominance and sign invariants counted over every replication and
/// time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InvariantReport {
    pub checks: usize,
    pub empirical_argmin: usize,
    pub oracle_argmin: usize,
    pub dominance: usize,
    pub negative_oracle_excess: usize,
    pub tail_monotonicity: usize,
}

impl InvariantReport {
    pub fn violations(&self) -> usize {
        self.empirical_argmin
            + self.oracle_argmin
            + self.dominance
            + self.negative_oracle_excess
            + self.tail_monotonicity
    }
}

pub fn invariant_check(results: &[ReplicationResult]) -> InvariantReport {
    let mut rep = InvariantReport::default();
    for r in results {
        for rec in &r.times {
            rep.checks += 1;
            let rh = &rec.empirical_risks;
            if rh.iter().any(|&v| rh[rec.j_hat] > v) {
                rep.empirical_argmin += 1;
            }
            let rt = &rec.oracle_risks;
            if rt.iter().any(|&v| rt[rec.j_tilde] > v) || rec.h_tilde.iter().any(|&h| rec.excess_oracle > h) {
                rep.oracle_argmin += 1;
            }
            if rec.combined_risk > rh[rec.j_hat] + DOMINANCE_TOL {
                rep.dominance += 1;
            }
            if rec.excess_oracle < -1e-9 {
                rep.negative_oracle_excess += 1;
            }
        }
    }
    rep
}

fn monotone_violations<'a>(freqs: impl Iterator<Item = &'a [f64]>) -> usize {
    freqs
        .map(|f| f.windows(2).filter(|w| w[1] > w[0]).count())
        .sum()
}

/// Everything `verify` produces.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub replications: usize,
    pub learner_ids: Vec<String>,
    pub manifest: Manifest,
    pub invariants: InvariantReport,
    pub tails: Vec<TailReport>,
    pub expectations: Vec<ExpectationRow>,
    pub bernstein: BernsteinReport,
    pub janson: Vec<JansonReport>,
    pub direction: JansonDirection,
    pub audit: AuditReport,
    pub determinism_ok: bool,
    pub distinct_seeds: bool,
}

impl VerifyOutcome {
    pub fn failures(&self) -> usize {
        let mut n = self.invariants.violations();
        n += self.tails.iter().map(|r| r.tally.fail).sum::<usize>();
        n += self.expectations.iter().filter(|e| !e.pass).count();
        n += self.bernstein.tally.fail + self.bernstein.variance_violations();
        n += self.janson.iter().map(|r| r.tally.fail).sum::<usize>();
        n += usize::from(!self.direction.agrees());
        n += self.audit.violations();
        n += usize::from(!self.determinism_ok) + usize::from(!self.distinct_seeds);
        n
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "replications: {}", self.replications);
        let _ = writeln!(
            s,
            "constants: B = {}, b1 = {}, b2 = {}, v1 = {}, v2 = {}, beta = {}, gamma = {}, deg = {}, ratio = {}",
            self.manifest.outcome_bound,
            self.manifest.b1,
            self.manifest.b2,
            self.manifest.v1,
            self.manifest.bounds.v2().unwrap_or(f64::NAN),
            self.manifest.beta,
            self.manifest.gamma,
            self.manifest.degree,
            self.manifest.ratio
        );
        let i = &self.invariants;
        let _ = writeln!(
            s,
            "invariants over {} (replication, t) pairs: argmin {} / oracle argmin {} / dominance {} / negative oracle excess {} / tail monotonicity {}",
            i.checks, i.empirical_argmin, i.oracle_argmin, i.dominance, i.negative_oracle_excess, i.tail_monotonicity
        );
        for r in &self.tails {
            let _ = writeln!(s, "high-probability tail, t = {} ({}): {}", r.t, r.regime, r.tally.line());
        }
        for e in &self.expectations {
            let _ = writeln!(
                s,
                "expected excess, t = {}, {:?} bound: mean {:.3e} (se {:.1e}) vs {:.3e}: {}",
                e.t,
                e.kind,
                e.mean,
                e.standard_error,
                e.bound,
                if e.pass { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            s,
            "risk-gap deviation (V = {}): {}; var_tilde > v2 in {} cases",
            self.bernstein.v,
            self.bernstein.tally.line(),
            self.bernstein.variance_violations()
        );
        for r in &self.janson {
            let _ = writeln!(s, "single-slice tail, {} (deg {}): {}", r.label, r.degree, r.tally.line());
        }
        let d = &self.direction;
        let _ = writeln!(
            s,
            "clique-size direction at x = {:.3e}: frequency {} -> {}, bound {:.3e} -> {:.3e}: {}",
            d.x,
            d.frequency_small,
            d.frequency_large,
            d.bound_small,
            d.bound_large,
            if d.agrees() { "PASS" } else { "FAIL" }
        );
        let _ = writeln!(s, "assumption audit: {} violations", self.audit.violations());
        let _ = writeln!(
            s,
            "determinism self-check: {}; distinct replication seeds: {}",
            if self.determinism_ok { "PASS" } else { "FAIL" },
            if self.distinct_seeds { "PASS" } else { "FAIL" }
        );
        let low: usize = self.tails.iter().map(|r| r.tally.low_power).sum::<usize>()
            + self.bernstein.tally.low_power
            + self.janson.iter().map(|r| r.tally.low_power).sum::<usize>();
        if low > 0 {
            let _ = writeln!(s, "low-power cells (Wilson half-width > {LOW_POWER}): {low}");
        }
        let _ = writeln!(s, "non-vacuous failures: {}", self.failures());
        s
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let opt = |b: &Option<BoundValue>| b.map(|b| real(b.raw)).unwrap_or_default();
        let rows: Vec<Vec<String>> = self
            .tails
            .iter()
            .flat_map(|r| {
                r.cells.iter().map(move |c| {
                    vec![
                        r.t.to_string(),
                        real(c.x),
                        real(c.frequency),
                        opt(&c.time_bound),
                        opt(&c.graph_bound),
                        real(c.bound.capped),
                        u8::from(c.bound.vacuous).to_string(),
                        real(c.half_width),
                        c.status.name().into(),
                        r.regime.into(),
                    ]
                })
            })
            .collect();
        csvio::write_table(
            csvio::create(&out.join("tail_report.csv"))?,
            &["t", "x", "frequency", "time_bound", "graph_bound", "bound", "vacuous", "wilson_half_width", "status", "regime"],
            &rows,
        )?;
        let rows: Vec<Vec<String>> = self
            .expectations
            .iter()
            .map(|e| {
                vec![
                    e.t.to_string(),
                    format!("{:?}", e.kind).to_lowercase(),
                    real(e.mean),
                    real(e.standard_error),
                    e.n.to_string(),
                    real(e.bound),
                    if e.pass { "PASS" } else { "FAIL" }.into(),
                ]
            })
            .collect();
        csvio::write_table(
            csvio::create(&out.join("expectation_report.csv"))?,
            &["t", "bound_kind", "mean", "standard_error", "n", "bound", "status"],
            &rows,
        )?;
        let ids: Vec<&str> = self.learner_ids.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = self
            .bernstein
            .cells
            .iter()
            .map(|c| {
                vec![
                    c.t.to_string(),
                    ids.get(c.learner).copied().unwrap_or("?").into(),
                    real(c.x),
                    real(c.frequency),
                    real(c.bound.capped),
                    u8::from(c.bound.vacuous).to_string(),
                    real(c.half_width),
                    c.status.name().into(),
                ]
            })
            .collect();
        csvio::write_table(
            csvio::create(&out.join("bernstein_report.csv"))?,
            &["t", "learner_id", "x", "frequency", "bound", "vacuous", "wilson_half_width", "status"],
            &rows,
        )?;
        let rows: Vec<Vec<String>> = self
            .bernstein
            .variance
            .iter()
            .map(|r| {
                vec![
                    r.t.to_string(),
                    ids.get(r.learner).copied().unwrap_or("?").into(),
                    real(r.worst),
                    real(r.v2),
                    r.violations.to_string(),
                ]
            })
            .collect();
        csvio::write_table(
            csvio::create(&out.join("variance_report.csv"))?,
            &["t", "learner_id", "max_tilde_var", "v2", "violations"],
            &rows,
        )?;
        let rows: Vec<Vec<String>> = self
            .janson
            .iter()
            .chain([&self.direction.small, &self.direction.large])
            .flat_map(|r| {
                r.cells.iter().map(move |c| {
                    vec![
                        r.label.clone(),
                        r.degree.to_string(),
                        real(c.x),
                        real(c.frequency),
                        real(c.bound),
                        real(c.half_width),
                        c.status.name().into(),
                    ]
                })
            })
            .collect();
        csvio::write_table(
            csvio::create(&out.join("janson_report.csv"))?,
            &["graph", "degree", "x", "frequency", "bound", "wilson_half_width", "status"],
            &rows,
        )?;
        let rows: Vec<Vec<String>> = self
            .audit
            .checks
            .iter()
            .map(|c| {
                vec![
                    c.name.clone(),
                    real(c.worst),
                    real(c.bound),
                    c.evaluations.to_string(),
                    c.violations.to_string(),
                ]
            })
            .collect();
        csvio::write_table(
            csvio::create(&out.join("audit_report.csv"))?,
            &["check", "worst", "bound", "evaluations", "violations"],
            &rows,
        )?;
        std::fs::write(out.join("summary.txt"), self.summary())?;
        Ok(())
    }
}

/// The full verification suite for one experiment config.
pub fn verify(config: &ExperimentConfig) -> Result<VerifyOutcome> {
    Ok(verify_detailed(config)?.0)
}

/// [`verify`] that also hands back the per-replication results.
pub fn verify_detailed(config: &ExperimentConfig) -> Result<(VerifyOutcome, Vec<ReplicationResult>)> {
    let manifest = Manifest::from_config(config)?;
    let seeds = replication_seeds(config);
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let distinct_seeds = sorted.len() == seeds.len();
    if !distinct_seeds {
        log::warn!("replication seeds repeat: {} distinct of {}", sorted.len(), seeds.len());
    }
    log::info!("running {} replications", seeds.len());
    let results = run_replications(config, &seeds)?;
    let determinism_ok = run_one(config, 0, seeds[0])? == results[0];

    let mut invariants = invariant_check(&results);
    let base = manifest.bounds;
    let mut tails = Vec::new();
    let mut expectations = Vec::new();
    for &t in &config.verify.times {
        let p = params_at(&base, t)?;
        tails.push(tail_check(&results, &p, config.verify.x_points)?);
        expectations.extend(expectation_check(&results, &p)?);
    }
    let bernstein = bernstein_check(&results, &base, base.v1, &config.verify.times, config.verify.x_points)?;
    invariants.tail_monotonicity = monotone_violations(
        tails
            .iter()
            .map(|r| r.cells.iter().map(|c| c.frequency).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .iter()
            .map(Vec::as_slice),
    );

    log::info!("single-slice tails");
    let draws = config.verify.janson_draws;
    let dgp = DgpConfig {
        seed: seed::substream(config.seed, 1),
        ..config.dgp.clone()
    };
    let edgeless = DgpConfig {
        graph: GraphKind::DisjointCliques { size: 1 },
        ..dgp.clone()
    };
    let janson = vec![
        janson_empirical_check(&edgeless, "edgeless", draws, config.verify.x_points)?,
        janson_empirical_check(&dgp, "configured", draws, config.verify.x_points)?,
    ];
    let (small, large) = direction_sizes(dgp.unit_count);
    let direction = janson_direction(&dgp, small, large, draws, config.verify.x_points)?;

    log::info!("assumption audit");
    let audit_dgp = DgpConfig {
        seed: seeds[0],
        ..config.dgp.clone()
    };
    let (panel, _, oracle) = generate(&audit_dgp)?;
    let predictors = random_test_predictors(&oracle, config.verify.audit_predictors.max(1), seed::substream(config.seed, 2));
    let audit = empirical_assumption_audit(
        &panel,
        &oracle,
        &base,
        &predictors,
        &AuditConfig {
            draws: config.verify.audit_draws,
            draws_per_unit: config.verify.draws_per_unit,
            seed: seed::substream(config.seed, 3),
            ..AuditConfig::default()
        },
    )?;

    let outcome = VerifyOutcome {
        replications: results.len(),
        learner_ids: config.learners.iter().map(|l| l.id.clone()).collect(),
        manifest,
        invariants,
        tails,
        expectations,
        bernstein,
        janson,
        direction,
        audit,
        determinism_ok,
        distinct_seeds,
    };
    Ok((outcome, results))
}

/// Clique sizes `d` and `2d` dividing the unit count, preferring 2 and 4.
fn direction_sizes(n: usize) -> (usize, usize) {
    [(2, 4), (1, 2)]
        .into_iter()
        .find(|(a, b)| n % a == 0 && n % b == 0)
        .unwrap_or((1, 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // p = 0.5, n = 100: 1.96 / 1.0384 * sqrt(0.0025 + 0.000096)
        let hw = wilson_half_width(50, 100);
        assert!((hw - 0.096_177).abs() < 1e-5, "{hw}");
        let hw = wilson_half_width(0, 1);
        assert!(hw > LOW_POWER);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 10.0, 5);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[4], 10.0);
        assert!((g[2] - 0.1).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn vacuous_cells_never_fail() {
        let b = BoundValue::new(3.0);
        assert_eq!(Status::judge(1.0, b, 0.0), Status::Vacuous);
        assert_eq!(Status::judge(0.0, BoundValue::new(0.01), 0.0), Status::Pass);
        assert_eq!(Status::judge(0.5, BoundValue::new(0.01), 0.01), Status::Fail);
    }
}
