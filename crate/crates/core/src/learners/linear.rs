//! Least squares and ridge with an unpenalized intercept.

use alloc::vec;

use super::Model;
use crate::data::History;
use crate::linalg;

/// `penalty = None` is ordinary least squares, solved with the minimum-norm
/// pseudo-inverse so rank-deficient designs stay well defined.
pub(super) fn fit(history: History<'_>, penalty: Option<f64>) -> Model {
    let d = history.slices[0].covariate_dim() + history.slices[0].summary_dim();
    let mut n = 0usize;
    let mut mean_x = vec![0.0; d];
    let mut mean_y = 0.0;
    for (_, o) in history.declared() {
        n += 1;
        for (m, v) in mean_x.iter_mut().zip(o.features()) {
            *m += v;
        }
        mean_y += o.outcome;
    }
    let nf = n as f64;
    mean_x.iter_mut().for_each(|m| *m /= nf);
    mean_y /= nf;

    let mut xtx = vec![0.0; d * d];
    let mut xty = vec![0.0; d];
    let mut row = vec![0.0; d];
    for (_, o) in history.declared() {
        for ((r, v), m) in row.iter_mut().zip(o.features()).zip(&mean_x) {
            *r = v - m;
        }
        let yc = o.outcome - mean_y;
        for i in 0..d {
            xty[i] += row[i] * yc;
            for j in i..d {
                xtx[i * d + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            xtx[i * d + j] = xtx[j * d + i];
        }
    }
    let beta = match penalty {
        Some(l) if l > 0.0 => {
            for i in 0..d {
                xtx[i * d + i] += l;
            }
            linalg::solve(&xtx, &xty, d).unwrap_or_else(|| linalg::psd_pinv_solve(&xtx, &xty, d))
        }
        _ => linalg::psd_pinv_solve(&xtx, &xty, d),
    };
    let intercept = mean_y - beta.iter().zip(&mean_x).map(|(b, m)| b * m).sum::<f64>();
    Model::Linear {
        intercept,
        coefficients: beta,
    }
}
