use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Stacked one-step-ahead predictions: one row `(theta_1(x), ..., theta_J(x))`
/// per declared observation, with the observed outcome as target. The Gram
/// sums are kept up to date so solvers never touch the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaDesign {
    learners: usize,
    rows: Vec<f64>,
    targets: Vec<f64>,
    gram: Vec<f64>,
    cross: Vec<f64>,
    target_sq: f64,
}

/// Mean-scaled quadratic form of a design: the objective at `w` is
/// `w' G w - 2 c' w + yy`, i.e. the mean squared residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    pub dim: usize,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub yy: f64,
}

impl Gram {
    pub fn objective(&self, w: &[f64]) -> f64 {
        let j = self.dim;
        let mut quad = 0.0;
        for a in 0..j {
            let row: f64 = self.g[a * j..(a + 1) * j].iter().zip(w).map(|(g, v)| g * v).sum();
            quad += w[a] * (row - 2.0 * self.c[a]);
        }
        (quad + self.yy).max(0.0)
    }

    /// Gradient `2 (G w - c)`.
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let j = self.dim;
        (0..j)
            .map(|a| 2.0 * ((0..j).map(|b| self.g[a * j + b] * w[b]).sum::<f64>() - self.c[a]))
            .collect()
    }
}

impl MetaDesign {
    pub fn new(learners: usize) -> Self {
        Self {
            learners,
            rows: Vec::new(),
            targets: Vec::new(),
            gram: vec![0.0; learners * learners],
            cross: vec![0.0; learners],
            target_sq: 0.0,
        }
    }

    /// Builds a design from rows of predictions, checking they lie in
    /// `[0, bound]`.
    pub fn from_rows(rows: &[Vec<f64>], targets: &[f64], bound: f64) -> Result<Self> {
        let j = rows.first().map(Vec::len).unwrap_or(0);
        let mut d = Self::new(j);
        if rows.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: targets.len(),
            });
        }
        for (r, &y) in rows.iter().zip(targets) {
            if let Some(&v) = r.iter().find(|v| !(0.0..=bound).contains(*v)) {
                return Err(Error::PredictionOutOfRange { value: v, bound });
            }
            d.push_row(r, y)?;
        }
        Ok(d)
    }

    pub fn push_row(&mut self, predictions: &[f64], target: f64) -> Result<()> {
        let j = self.learners;
        if predictions.len() != j {
            return Err(Error::DimensionMismatch {
                expected: j,
                got: predictions.len(),
            });
        }
        for a in 0..j {
            self.cross[a] += predictions[a] * target;
            for b in a..j {
                self.gram[a * j + b] += predictions[a] * predictions[b];
            }
        }
        self.target_sq += target * target;
        self.rows.extend_from_slice(predictions);
        self.targets.push(target);
        Ok(())
    }

    pub fn learners(&self) -> usize {
        self.learners
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.learners..(i + 1) * self.learners]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn gram(&self) -> Result<Gram> {
        if self.learners == 0 {
            return Err(Error::InvalidParameters("design has no learners".into()));
        }
        if self.is_empty() {
            return Err(Error::EmptyDesign);
        }
        let j = self.learners;
        let n = self.len() as f64;
        let mut g = vec![0.0; j * j];
        for a in 0..j {
            for b in a..j {
                g[a * j + b] = self.gram[a * j + b] / n;
                g[b * j + a] = g[a * j + b];
            }
        }
        Ok(Gram {
            dim: j,
            g,
            c: self.cross.iter().map(|v| v / n).collect(),
            yy: self.target_sq / n,
        })
    }

    /// Residual sum of squares `sum_rows (y - w' p)^2`, computed from the rows.
    pub fn objective(&self, w: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| {
                let fit: f64 = self.row(i).iter().zip(w).map(|(p, s)| p * s).sum();
                let r = self.targets[i] - fit;
                r * r
            })
            .sum()
    }
}
