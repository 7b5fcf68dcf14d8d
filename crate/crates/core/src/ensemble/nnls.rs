//! Nonnegative least squares (Lawson-Hanson active set) on the Gram form.

use alloc::vec;
use alloc::vec::Vec;

use super::design::{Gram, MetaDesign};
use crate::{linalg, Result};

/// Minimizes the residual sum of squares over `w >= 0`.
pub fn nnls_meta(design: &MetaDesign) -> Result<Vec<f64>> {
    Ok(nnls_gram(&design.gram()?))
}

pub fn nnls_gram(gram: &Gram) -> Vec<f64> {
    let j = gram.dim;
    let scale = gram
        .c
        .iter()
        .chain(gram.g.iter())
        .fold(0.0f64, |m, v| m.max(libm::fabs(*v)))
        .max(f64::MIN_POSITIVE);
    let tol = 1e-13 * scale;
    let mut w = vec![0.0; j];
    let mut passive = vec![false; j];
    let residual = |w: &[f64]| -> Vec<f64> {
        (0..j)
            .map(|a| gram.c[a] - (0..j).map(|b| gram.g[a * j + b] * w[b]).sum::<f64>())
            .collect()
    };
    for _outer in 0..(10 * j + 10) {
        let r = residual(&w);
        let Some(enter) = (0..j)
            .filter(|&k| !passive[k] && r[k] > tol)
            .max_by(|&a, &b| r[a].total_cmp(&r[b]).then(b.cmp(&a)))
        else {
            break;
        };
        passive[enter] = true;
        for _inner in 0..(10 * j + 10) {
            let s = passive_solve(gram, &passive);
            if (0..j).all(|k| !passive[k] || s[k] > 0.0) {
                w = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for k in 0..j {
                if passive[k] && s[k] <= 0.0 {
                    let denom = w[k] - s[k];
                    if denom > 0.0 {
                        alpha = alpha.min(w[k] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = if alpha.is_finite() { alpha } else { 0.0 };
            for k in 0..j {
                w[k] += alpha * (s[k] - w[k]);
                if passive[k] && w[k] <= 1e-15 * scale.max(1.0) {
                    passive[k] = false;
                    w[k] = 0.0;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    w.iter_mut().for_each(|v| *v = v.max(0.0));
    w
}

fn passive_solve(gram: &Gram, passive: &[bool]) -> Vec<f64> {
    let j = gram.dim;
    let idx: Vec<usize> = (0..j).filter(|&k| passive[k]).collect();
    let m = idx.len();
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for (r, &p) in idx.iter().enumerate() {
        for (s, &q) in idx.iter().enumerate() {
            a[r * m + s] = gram.g[p * j + q];
        }
        b[r] = gram.c[p];
    }
    let sol = linalg::psd_pinv_solve(&a, &b, m);
    let mut out = vec![0.0; j];
    for (r, &p) in idx.iter().enumerate() {
        out[p] = sol[r];
    }
    out
}

/// Largest violation of the NNLS optimality conditions, on the mean-scaled
/// objective: `|grad_k|` where `w_k > 0` and `max(0, -grad_k)` where `w_k = 0`.
pub fn nnls_kkt_residual(gram: &Gram, w: &[f64]) -> f64 {
    let grad = gram.gradient(w);
    w.iter()
        .zip(&grad)
        .map(|(wk, g)| if *wk > 0.0 { libm::fabs(*g) } else { (-g).max(0.0) })
        .fold(0.0, f64::max)
}
