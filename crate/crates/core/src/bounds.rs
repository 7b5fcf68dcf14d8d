//! Constants and right-hand sides of the oracle inequalities, the Bernstein
//! bound for the risk gap and the supporting dependency-graph inequalities.
//!
//! Probabilities are returned as [`BoundValue`]s carrying the raw value, the
//! value capped at 1 and a flag for vacuous (raw >= 1) bounds.

use core::f64::consts::{E, LN_2, PI};

use libm::{exp, log, pow, sqrt};

use alloc::format;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct BoundParameters {
    /// Almost-sure envelope of the loss gap.
    pub b1: f64,
    /// Almost-sure envelope of the centered loss gap, at most `2 b1`.
    pub b2: f64,
    /// Exponent of the variance bound, in `(0, 1]`.
    pub beta: f64,
    /// Constant of the variance bound.
    pub gamma: f64,
    /// Bound on the conditional variance of the averaged loss gap.
    pub v1: f64,
    /// `|A| / deg(G)`.
    pub ratio: f64,
    pub a: f64,
    /// Number of learners.
    pub j: usize,
    pub t: usize,
    pub n: u64,
    pub n_prime: u64,
}

impl BoundParameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameters(msg.into()));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.b1) {
            return bad("b1 must be positive");
        }
        if !pos(self.b2) || self.b2 > 2.0 * self.b1 {
            return Err(Error::InvalidParameters(format!(
                "b2 = {} must lie in (0, 2 b1] = (0, {}]",
                self.b2,
                2.0 * self.b1
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameters(format!(
                "beta = {} must lie in (0, 1]",
                self.beta
            )));
        }
        if !pos(self.gamma) {
            return bad("gamma must be positive");
        }
        if !pos(self.v1) {
            return bad("v1 must be positive");
        }
        if !pos(self.ratio) {
            return bad("ratio |A|/deg(G) must be positive");
        }
        if !pos(self.a) {
            return bad("a must be positive");
        }
        if self.j == 0 {
            return bad("J must be at least 1");
        }
        if self.t == 0 {
            return bad("t must be at least 1");
        }
        if self.n < 2 || self.n_prime < 2 {
            return bad("N and N' must be at least 2");
        }
        Ok(())
    }

    pub fn v2(&self) -> Result<f64> {
        v2(self.b2, self.v1, self.ratio)
    }
}

/// `v2 = (3 pi / 2) [(15 b2 / ratio)^2 + 64 v1 / ratio]`.
pub fn v2(b2: f64, v1: f64, ratio: f64) -> Result<f64> {
    if !(ratio > 0.0) {
        return Err(Error::InvalidParameters(format!("ratio {ratio} must be positive")));
    }
    let q = 15.0 * b2 / ratio;
    Ok(1.5 * PI * (q * q + 64.0 * v1 / ratio))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub raw: f64,
    pub capped: f64,
    pub vacuous: bool,
}

impl BoundValue {
    pub fn new(raw: f64) -> Self {
        Self {
            raw,
            capped: raw.min(1.0),
            vacuous: !(raw < 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BoundKind {
    /// Driven by the number of time steps `t`.
    Time,
    /// Driven by `|A| / deg(G)`.
    Graph,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Constants {
    pub v2: f64,
    pub c1: f64,
    pub c2: f64,
    pub c1_prime: f64,
    pub c2_prime: f64,
    pub x_lower: f64,
    pub x_lower_prime: f64,
}

pub fn theorem1_constants(p: &BoundParameters) -> Result<Theorem1Constants> {
    p.validate()?;
    let v2 = p.v2()?;
    let (a, beta) = (p.a, p.beta);
    let one_a = 1.0 + a;
    Ok(Theorem1Constants {
        v2,
        c1: pow(2.0, 5.0 - beta) * one_a * one_a * p.gamma / pow(a, beta),
        c2: 8.0 * one_a * p.b2 / 3.0,
        c1_prime: pow(2.0, 6.0 + 2.0 * beta) * E * E * one_a * one_a * p.gamma / pow(a, beta),
        c2_prime: 60.0 * E * one_a * p.b2,
        x_lower: a * pow(pow(2.0, -(p.n as f64)) * v2 / p.gamma, 1.0 / beta),
        x_lower_prime: a * p.b1 * pow(2.0, -(p.n_prime as f64)),
    })
}

/// Tail bound on `excess_SL >= (1 + 2a) excess_oracle + x`.
pub fn theorem1_tail_bound(p: &BoundParameters, x: f64, which: BoundKind) -> Result<BoundValue> {
    let c = theorem1_constants(p)?;
    let (t, j, beta) = (p.t as f64, p.j as f64, p.beta);
    let raw = match which {
        BoundKind::Time => {
            if !(x >= c.x_lower) {
                return Err(Error::BelowThreshold {
                    x,
                    threshold: c.x_lower,
                });
            }
            2.0 * j
                * p.n as f64
                * (exp(-t * pow(x, 2.0 - beta) / c.c1) + exp(-t * x / c.c2))
        }
        BoundKind::Graph => {
            if !(x >= c.x_lower_prime) {
                return Err(Error::BelowThreshold {
                    x,
                    threshold: c.x_lower_prime,
                });
            }
            let info = p.ratio / pow(t, beta);
            2.0 * E * E
                * j
                * p.n_prime as f64
                * (exp(-info * pow(x, 2.0 - beta) / c.c1_prime) + exp(-p.ratio * x / c.c2_prime))
        }
    };
    Ok(BoundValue::new(raw))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorollaryBound {
    pub value: f64,
    pub c3: f64,
    pub c3_prime: f64,
    pub minimal_n: u64,
    pub minimal_n_prime: u64,
}

/// `C3 = (v2 / gamma)^((2 - beta) / beta) / (2^(5 - beta) gamma)`.
pub fn c3(p: &BoundParameters) -> Result<f64> {
    let v2 = p.v2()?;
    Ok(pow(v2 / p.gamma, (2.0 - p.beta) / p.beta) / (pow(2.0, 5.0 - p.beta) * p.gamma))
}

/// `C3' = b1 / (2^(6 + 2 beta) e^2 gamma)`.
pub fn c3_prime(p: &BoundParameters) -> f64 {
    p.b1 / (pow(2.0, 6.0 + 2.0 * p.beta) * E * E * p.gamma)
}

fn admissible(lower: f64) -> u64 {
    if lower <= 2.0 {
        2
    } else {
        libm::ceil(lower) as u64
    }
}

/// Smallest `N >= 2` with `N >= beta/(2-beta) (log t + log C3) / log 2`.
pub fn minimal_n(p: &BoundParameters) -> Result<u64> {
    let lower = p.beta / (2.0 - p.beta) * (log(p.t as f64) + log(c3(p)?)) / LN_2;
    Ok(admissible(lower))
}

/// Smallest `N' >= 2` with
/// `N' >= beta/(2-beta) (log(ratio / t^beta) + log C3') / log 2`.
pub fn minimal_n_prime(p: &BoundParameters) -> u64 {
    let info = p.ratio / pow(p.t as f64, p.beta);
    let lower = p.beta / (2.0 - p.beta) * (log(info) + log(c3_prime(p))) / LN_2;
    admissible(lower)
}

/// Bound on the expected excess `E[excess_SL - (1 + 2a) excess_oracle]`.
/// Requires `a` in `(0, 1]` and `N` (resp. `N'`) above its side condition.
pub fn corollary_bound(p: &BoundParameters, which: BoundKind) -> Result<CorollaryBound> {
    p.validate()?;
    if p.a > 1.0 {
        return Err(Error::InvalidParameters(format!(
            "a = {} must lie in (0, 1] for the expected-risk bound",
            p.a
        )));
    }
    let c = theorem1_constants(p)?;
    let minimal_n = minimal_n(p)?;
    let minimal_n_prime = minimal_n_prime(p);
    let (t, j, beta) = (p.t as f64, p.j as f64, p.beta);
    let value = match which {
        BoundKind::Time => {
            if p.n < minimal_n {
                return Err(Error::SideCondition {
                    which: "N",
                    given: p.n,
                    minimal: minimal_n,
                });
            }
            let l = log(2.0 * j * p.n as f64);
            3.0 * pow(c.c1 * l / t, 1.0 / (2.0 - beta)) + 2.0 * c.c2 * l / t
        }
        BoundKind::Graph => {
            if p.n_prime < minimal_n_prime {
                return Err(Error::SideCondition {
                    which: "N'",
                    given: p.n_prime,
                    minimal: minimal_n_prime,
                });
            }
            let l = log(2.0 * j * p.n_prime as f64);
            let info = p.ratio / pow(t, beta);
            3.0 * pow(c.c1_prime * l / info, 1.0 / (2.0 - beta)) + 2.0 * c.c2_prime * l / p.ratio
        }
    };
    Ok(CorollaryBound {
        value,
        c3: c3(p)?,
        c3_prime: c3_prime(p),
        minimal_n,
        minimal_n_prime,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    GraphSharper,
    TimeSharper,
    Indeterminate,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::GraphSharper => "graph-sharper",
            Regime::TimeSharper => "time-sharper",
            Regime::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeComparison {
    pub verdict: Regime,
    /// `t^(1+beta) <= ratio / (2 e^2 8^beta)`.
    pub first: bool,
    /// `t <= ratio / (45 e / 2)`.
    pub second: bool,
    /// `ratio >= 24 e (3 / (2e))^(1/beta)`.
    pub ratio_large: bool,
    pub condition_one: bool,
    pub condition_two: bool,
    /// Lower bound on a common `N = N'` for which both expected-risk bounds
    /// hold.
    pub common_n_lower: f64,
    pub common_n: u64,
}

pub fn regime_compare(p: &BoundParameters) -> Result<RegimeComparison> {
    p.validate()?;
    let (t, beta, ratio) = (p.t as f64, p.beta, p.ratio);
    let first_rhs = ratio / (2.0 * E * E * pow(8.0, beta));
    let second_rhs = ratio / (45.0 * E / 2.0);
    let lhs1 = pow(t, 1.0 + beta);
    let first = lhs1 <= first_rhs;
    let second = t <= second_rhs;
    let ratio_large = ratio >= 24.0 * E * pow(3.0 / (2.0 * E), 1.0 / beta);
    let condition_one = first && second;
    let condition_two = first && ratio_large;
    let verdict = if condition_one {
        Regime::GraphSharper
    } else if lhs1 > first_rhs && t > second_rhs {
        Regime::TimeSharper
    } else {
        Regime::Indeterminate
    };
    let c3 = c3(p)?;
    let c3p = c3_prime(p);
    let extra = log(c3 / (2.0 * E * E * pow(8.0, beta) * c3p)).max(0.0);
    let common_n_lower =
        beta / (2.0 - beta) * (log(ratio / pow(t, beta)) + log(c3p) + extra) / LN_2;
    Ok(RegimeComparison {
        verdict,
        first,
        second,
        ratio_large,
        condition_one,
        condition_two,
        common_n_lower,
        common_n: admissible(common_n_lower),
    })
}

/// Bernstein-type bound `exp(2 - ratio x^2 / (32 e^2 V + 15 e b2 x))` on
/// `|H_hat - H_tilde| >= x` for a learner on the event that the conditional
/// variances stay below `V`.
pub fn theorem2_tail_bound(ratio: f64, v: f64, b2: f64, x: f64) -> Result<BoundValue> {
    if !(x >= 0.0) || !(v > 0.0) || !(ratio > 0.0) || !(b2 >= 0.0) {
        return Err(Error::InvalidParameters(format!(
            "need x >= 0, V > 0, ratio > 0, b2 >= 0; got x = {x}, V = {v}, ratio = {ratio}, b2 = {b2}"
        )));
    }
    let denom = 32.0 * E * E * v + 15.0 * E * b2 * x;
    Ok(BoundValue::new(exp(2.0 - ratio * x * x / denom)))
}

/// `h(u) = (1 + u) log(1 + u) - u`.
pub fn h(u: f64) -> f64 {
    (1.0 + u) * libm::log1p(u) - u
}

/// Janson's bound on `P(S - E S >= x)` for a unit average `S` of `n`
/// variables bounded by `B` (after centering) with total variance scale `V`
/// and dependency graph degree `deg`:
/// `exp(-(n V / (B^2 deg)) h(4 B x / (5 V)))`.
pub fn janson_bound(n_units: usize, deg: usize, v: f64, b: f64, x: f64) -> Result<f64> {
    if n_units == 0 || deg == 0 || !(b > 0.0) || !(v >= 0.0) || !(x >= 0.0) {
        return Err(Error::InvalidParameters(format!(
            "need n, deg, B > 0 and V, x >= 0; got n = {n_units}, deg = {deg}, V = {v}, B = {b}, x = {x}"
        )));
    }
    if v == 0.0 {
        return Ok(if x > 0.0 { 0.0 } else { 1.0 });
    }
    let scale = n_units as f64 * v / (b * b * deg as f64);
    Ok(exp(-scale * h(4.0 * b * x / (5.0 * v))).min(1.0))
}

/// Moment bound `(3 pi / 2) [(15 B deg / (2n))^p p^p + (32 V deg / n)^(p/2) p^(p/2)]`.
pub fn rosenthal_moment_bound(n_units: usize, deg: usize, v: f64, b: f64, pth: f64) -> Result<f64> {
    if !(pth >= 2.0) || n_units == 0 {
        return Err(Error::InvalidParameters(format!(
            "need p >= 2 and n >= 1; got p = {pth}, n = {n_units}"
        )));
    }
    let (n, d) = (n_units as f64, deg as f64);
    Ok(1.5
        * PI
        * (pow(15.0 * b * d / (2.0 * n), pth) * pow(pth, pth)
            + pow(32.0 * v * d / n, pth / 2.0) * pow(pth, pth / 2.0)))
}

/// The positive `p` with `c = b sqrt(p) + a p`, so that `c^2 <= (b^2 + 2ac) p`.
pub fn quadratic_lemma_solve(a: f64, b: f64, c: f64) -> Result<f64> {
    if !(a > 0.0 && b >= 0.0 && c > 0.0) || !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "need a > 0, b >= 0, c > 0; got ({a}, {b}, {c})"
        )));
    }
    // root of a u^2 + b u - c in the cancellation-free form
    let u = 2.0 * c / (b + sqrt(b * b + 4.0 * a * c));
    Ok(u * u)
}

/// `gamma = 4 a1^2 / a2` for a loss with Lipschitz constant `a1` and
/// curvature `a2`.
pub fn strong_convexity_gamma(a1: f64, a2: f64) -> Result<f64> {
    if !(a1 > 0.0 && a2 > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "need a1, a2 > 0; got ({a1}, {a2})"
        )));
    }
    Ok(4.0 * a1 * a1 / a2)
}

/// `(a1, a2)` for the squared loss with predictions and outcomes in `[0, B]`:
/// `a1 = 4B`, `a2 = 2`.
pub fn least_squares_constants(outcome_bound: f64) -> (f64, f64) {
    (4.0 * outcome_bound, 2.0)
}
