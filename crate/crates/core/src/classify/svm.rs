//! RBF-kernel support vector classifier, one-vs-rest, trained with SMO using
//! second-order working-set selection.
//!
//! Training rows are put in a canonical order first, so the learned model
//! does not depend on the order the rows were supplied in.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{argmax, row_sq_dist, LabeledSet};
use crate::error::Result;
use crate::Label;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvmSettings {
    /// Box constraint.
    pub c: f64,
    /// Kernel width; `None` picks `1 / (d * mean feature variance)`.
    pub gamma: Option<f64>,
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    /// Iteration cap is `max_iter_factor * n * classes`.
    pub max_iter_factor: usize,
}

impl Default for SvmSettings {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter_factor: 10,
        }
    }
}

/// One binary sub-model: `f(x) = sum_i alpha_i y_i K(x_i, x) - rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    /// Dual coefficients for every (canonically ordered) training row.
    pub alpha: Vec<f64>,
    /// `+1` for the positive class, `-1` otherwise.
    pub y: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    /// Maximal KKT violation at termination.
    pub kkt_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub classes: Vec<Label>,
    pub gamma: f64,
    pub c: f64,
    /// Training rows in canonical order.
    pub points: DMatrix<f64>,
    pub labels: Vec<Label>,
    /// One sub-model per class, in `classes` order.
    pub models: Vec<BinarySvm>,
}

pub fn rbf_kernel(a: &DMatrix<f64>, b: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| (-gamma * row_sq_dist(a, i, b, j)).exp())
}

fn auto_gamma(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows() as f64;
    let mean_var = x
        .column_iter()
        .map(|c| {
            let mu = c.sum() / n;
            c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n
        })
        .sum::<f64>()
        / x.ncols() as f64;
    if mean_var > 0.0 {
        1.0 / (x.ncols() as f64 * mean_var)
    } else {
        1.0
    }
}

fn canonical_order(set: &LabeledSet) -> Vec<usize> {
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| {
        set.coords
            .row(a)
            .iter()
            .zip(set.coords.row(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then_with(|| set.labels[a].cmp(&set.labels[b]))
    });
    order
}

impl SvmModel {
    pub(super) fn fit(set: &LabeledSet, classes: Vec<Label>, settings: &SvmSettings) -> Result<Self> {
        let order = canonical_order(set);
        let points = set.coords.select_rows(&order);
        let labels: Vec<Label> = order.iter().map(|&i| set.labels[i].clone()).collect();
        let gamma = settings.gamma.unwrap_or_else(|| auto_gamma(&points));
        let kernel = rbf_kernel(&points, &points, gamma);
        let max_iter = settings.max_iter_factor.max(1) * points.nrows() * classes.len();

        let models = std::thread::scope(|scope| {
            let handles: Vec<_> = classes
                .iter()
                .map(|class| {
                    let y: Vec<f64> = labels.iter().map(|l| if l == class { 1.0 } else { -1.0 }).collect();
                    let kernel = &kernel;
                    scope.spawn(move || solve_binary(kernel, y, settings.c, settings.tol, max_iter))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("SVM worker panicked")).collect()
        });

        Ok(Self {
            classes,
            gamma,
            c: settings.c,
            points,
            labels,
            models,
        })
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// One column per class.
    pub fn decision_values(&self, coords: &DMatrix<f64>) -> DMatrix<f64> {
        let k = rbf_kernel(coords, &self.points, self.gamma);
        let mut out = DMatrix::zeros(coords.nrows(), self.classes.len());
        for (c, m) in self.models.iter().enumerate() {
            let coef: Vec<f64> = m.alpha.iter().zip(&m.y).map(|(a, y)| a * y).collect();
            for q in 0..coords.nrows() {
                let s: f64 = k.row(q).iter().zip(&coef).map(|(kv, w)| kv * w).sum();
                out[(q, c)] = s - m.rho;
            }
        }
        out
    }

    pub(super) fn predict(&self, coords: &DMatrix<f64>) -> Vec<Label> {
        let values = self.decision_values(coords);
        values
            .row_iter()
            .map(|row| self.classes[argmax(row.iter().copied())].clone())
            .collect()
    }
}

fn in_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

fn in_low(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha > 0.0) || (y < 0.0 && alpha < c)
}

/// Maximal KKT violation `m(alpha) - M(alpha)` of a dual point.
pub fn kkt_gap(kernel: &DMatrix<f64>, y: &[f64], alpha: &[f64], c: f64) -> f64 {
    let n = y.len();
    let grad: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * kernel[(i, j)] * alpha[j]).sum::<f64>() - 1.0)
        .collect();
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..n {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) {
            up = up.max(v);
        }
        if in_low(alpha[t], y[t], c) {
            low = low.min(v);
        }
    }
    (up - low).max(0.0)
}

fn solve_binary(kernel: &DMatrix<f64>, y: Vec<f64>, c: f64, tol: f64, max_iter: usize) -> BinarySvm {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[(i, j)];
    let mut iterations = 0;
    let mut gap;

    loop {
        // Select i: maximal violating index in I_up.
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(alpha[t], y[t], c) {
                let v = -y[t] * grad[t];
                if v > g_max {
                    g_max = v;
                    i = t;
                }
            }
        }
        // Select j by the second-order gain, tracking M(alpha).
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        let mut best_gain = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t], c) {
                continue;
            }
            let v = -y[t] * grad[t];
            g_min = g_min.min(v);
            if i != usize::MAX && v < g_max {
                let b = g_max - v;
                let a = kernel[(i, i)] + kernel[(t, t)] - 2.0 * kernel[(i, t)];
                let gain = -(b * b) / if a > 0.0 { a } else { TAU };
                if gain < best_gain {
                    best_gain = gain;
                    j = t;
                }
            }
        }
        gap = (g_max - g_min).max(0.0);
        if i == usize::MAX || j == usize::MAX || gap < tol || iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = kernel[(i, i)] + kernel[(j, j)] + 2.0 * q(i, j);
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = kernel[(i, i)] + kernel[(j, j)] - 2.0 * q(i, j);
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * di + q(j, t) * dj;
        }
    }

    // Bias: average over free vectors, else midpoint of the feasible interval.
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (ub + lb) / 2.0 };

    BinarySvm {
        alpha,
        y,
        rho,
        iterations,
        kkt_gap: gap,
    }
}
