//! Least squares over the probability simplex: projected gradient with exact
//! Euclidean projection, plus the brute-force grid used as its oracle.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::design::{Gram, MetaDesign};
use crate::{linalg, seed, Error, Result};

/// Convex weights over the learners.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights {
    pub weights: Vec<f64>,
}

impl SimplexWeights {
    pub fn vertex(j: usize, k: usize) -> Self {
        let mut weights = vec![0.0; j];
        weights[k] = 1.0;
        Self { weights }
    }

    /// Clips tiny negative values and rescales to sum one.
    pub fn normalized(mut weights: Vec<f64>) -> Self {
        weights.iter_mut().for_each(|w| *w = w.max(0.0));
        let s: f64 = weights.iter().sum();
        if s > 0.0 {
            weights.iter_mut().for_each(|w| *w /= s);
        }
        Self { weights }
    }

    pub fn is_valid(&self) -> bool {
        self.weights.iter().all(|w| *w >= 0.0)
            && libm::fabs(self.weights.iter().sum::<f64>() - 1.0) <= 1e-9
    }
}

/// Euclidean projection onto `{w >= 0, sum w = 1}` (sort-based).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolver {
    pub max_iterations: usize,
    pub restarts: usize,
    /// Stop when the relative objective decrease falls below this.
    pub tolerance: f64,
    /// Finish with an exact search over supports when `J` is at most this.
    pub polish_max_learners: usize,
    pub seed: u64,
}

impl Default for SimplexSolver {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            restarts: 5,
            tolerance: 1e-10,
            polish_max_learners: 12,
            seed: 0x5eed,
        }
    }
}

impl SimplexSolver {
    /// Minimizes the mean squared residual of the design over the simplex.
    pub fn solve(&self, design: &MetaDesign) -> Result<SimplexWeights> {
        let gram = design.gram()?;
        Ok(self.solve_gram(&gram))
    }

    pub fn solve_gram(&self, gram: &Gram) -> SimplexWeights {
        let j = gram.dim;
        // best vertex first: this is the discrete pick and guarantees the
        // result is never worse than it
        let best_vertex = (0..j)
            .map(|k| (k, gram.g[k * j + k] - 2.0 * gram.c[k]))
            .fold((0, f64::INFINITY), |b, (k, v)| if v < b.1 { (k, v) } else { b })
            .0;
        let mut best = SimplexWeights::vertex(j, best_vertex).weights;
        let mut best_obj = gram.objective(&best);
        let mut starts = vec![best.clone()];
        let mut rng = seed::rng(self.seed);
        for _ in 0..self.restarts {
            let e: Vec<f64> = (0..j)
                .map(|_| -libm::log(1.0 - rng.random::<f64>()))
                .collect();
            let s: f64 = e.iter().sum();
            starts.push(e.into_iter().map(|v| v / s).collect());
        }
        for start in starts {
            let (w, obj) = self.descend(gram, start);
            if obj < best_obj {
                best = w;
                best_obj = obj;
            }
        }
        if j <= self.polish_max_learners {
            if let Some((w, obj)) = support_search(gram) {
                if obj < best_obj {
                    best = w;
                }
            }
        }
        SimplexWeights::normalized(best)
    }

    fn descend(&self, gram: &Gram, mut w: Vec<f64>) -> (Vec<f64>, f64) {
        let j = gram.dim;
        let trace: f64 = (0..j).map(|k| gram.g[k * j + k]).sum();
        let mut step = if trace > 0.0 { 1.0 / (2.0 * trace) } else { 1.0 };
        let mut f = gram.objective(&w);
        for _ in 0..self.max_iterations {
            let grad = gram.gradient(&w);
            let mut accepted = None;
            for _ in 0..60 {
                let cand = project_to_simplex(
                    &w.iter().zip(&grad).map(|(x, g)| x - step * g).collect::<Vec<_>>(),
                );
                let fc = gram.objective(&cand);
                let mut lin = 0.0;
                let mut sq = 0.0;
                for k in 0..j {
                    let d = cand[k] - w[k];
                    lin += grad[k] * d;
                    sq += d * d;
                }
                if fc <= f + lin + sq / (2.0 * step) + 1e-15 * f {
                    accepted = Some((cand, fc, sq));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, fc, sq)) = accepted else { break };
            if sq == 0.0 {
                break;
            }
            let decrease = f - fc;
            if fc <= f {
                w = cand;
                f = fc;
            } else {
                break;
            }
            if decrease <= self.tolerance * f.max(f64::MIN_POSITIVE) {
                break;
            }
            step *= 2.0;
        }
        (w, f)
    }
}

/// Exact minimizer over all supports: for each support, the equality
/// constrained optimum from its KKT system; infeasible or singular supports
/// are skipped.
fn support_search(gram: &Gram) -> Option<(Vec<f64>, f64)> {
    let j = gram.dim;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 1u32..(1u32 << j) {
        let support: Vec<usize> = (0..j).filter(|k| mask & (1 << k) != 0).collect();
        let m = support.len();
        let n = m + 1;
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        for (r, &p) in support.iter().enumerate() {
            for (s, &q) in support.iter().enumerate() {
                a[r * n + s] = 2.0 * gram.g[p * j + q];
            }
            a[r * n + m] = 1.0;
            a[m * n + r] = 1.0;
            b[r] = 2.0 * gram.c[p];
        }
        b[m] = 1.0;
        let Some(sol) = linalg::solve(&a, &b, n) else { continue };
        if sol[..m].iter().any(|v| *v < -1e-12 || !v.is_finite()) {
            continue;
        }
        let mut w = vec![0.0; j];
        for (r, &p) in support.iter().enumerate() {
            w[p] = sol[r].max(0.0);
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        let obj = gram.objective(&w);
        if best.as_ref().is_none_or(|(_, o)| obj < *o) {
            best = Some((w, obj));
        }
    }
    best
}

/// Continuous Super Learner weights with the default solver settings.
pub fn continuous_select(design: &MetaDesign) -> Result<SimplexWeights> {
    SimplexSolver::default().solve(design)
}

/// Exhaustive search over the grid `{k / K}` of the simplex. Ties keep the
/// first candidate in an enumeration that starts at the first vertex.
pub fn convex_grid_select(design: &MetaDesign, resolution: usize) -> Result<SimplexWeights> {
    let j = design.learners();
    if resolution == 0 {
        return Err(Error::InvalidParameters("grid resolution must be >= 1".into()));
    }
    let size = (resolution as u128).saturating_pow(j.saturating_sub(1) as u32);
    if size > 10_000_000 {
        return Err(Error::GridTooLarge(size));
    }
    let gram = design.gram()?;
    let mut counts = vec![0usize; j];
    let mut best = (Vec::new(), f64::INFINITY);
    grid_walk(&gram, resolution, 0, resolution, &mut counts, &mut best);
    Ok(SimplexWeights { weights: best.0 })
}

fn grid_walk(
    gram: &Gram,
    k_total: usize,
    pos: usize,
    remaining: usize,
    counts: &mut Vec<usize>,
    best: &mut (Vec<f64>, f64),
) {
    let j = counts.len();
    if pos + 1 == j {
        counts[pos] = remaining;
        let w: Vec<f64> = counts.iter().map(|&c| c as f64 / k_total as f64).collect();
        let obj = gram.objective(&w);
        if obj < best.1 {
            *best = (w, obj);
        }
        return;
    }
    for c in (0..=remaining).rev() {
        counts[pos] = c;
        grid_walk(gram, k_total, pos + 1, remaining - c, counts, best);
    }
}
