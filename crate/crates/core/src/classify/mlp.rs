//! Single-hidden-layer perceptron: input -> ReLU hidden -> softmax, trained on
//! cross-entropy with Adam.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Uniform};
use serde::Serialize;

use super::{argmax, LabeledSet};
use crate::error::Result;
use crate::rng::rng_from_seed;
use crate::Label;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlpSettings {
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for MlpSettings {
    fn default() -> Self {
        Self {
            hidden: 200,
            epochs: 5,
            batch: 32,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Weights and biases. Also used to hold gradients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// `hidden x inputs`
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// `classes x hidden`
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl MlpParams {
    pub fn zeros(inputs: usize, hidden: usize, classes: usize) -> Self {
        Self {
            w1: DMatrix::zeros(hidden, inputs),
            b1: DVector::zeros(hidden),
            w2: DMatrix::zeros(classes, hidden),
            b2: DVector::zeros(classes),
        }
    }

    /// Uniform in `+-1/sqrt(fan_in)` for every weight and bias.
    pub fn random(inputs: usize, hidden: usize, classes: usize, rng_seed: u64) -> Self {
        let mut rng = rng_from_seed(rng_seed);
        let mut p = Self::zeros(inputs, hidden, classes);
        let l1 = 1.0 / (inputs as f64).sqrt();
        let l2 = 1.0 / (hidden as f64).sqrt();
        let u1 = Uniform::new_inclusive(-l1, l1).expect("finite bounds");
        let u2 = Uniform::new_inclusive(-l2, l2).expect("finite bounds");
        p.w1.iter_mut().for_each(|v| *v = u1.sample(&mut rng));
        p.b1.iter_mut().for_each(|v| *v = u1.sample(&mut rng));
        p.w2.iter_mut().for_each(|v| *v = u2.sample(&mut rng));
        p.b2.iter_mut().for_each(|v| *v = u2.sample(&mut rng));
        p
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat view over every parameter, in `w1, b1, w2, b2` order.
    pub fn get_mut(&mut self, mut index: usize) -> &mut f64 {
        for part in [self.w1.as_mut_slice(), self.b1.as_mut_slice(), self.w2.as_mut_slice(), self.b2.as_mut_slice()] {
            if index < part.len() {
                return &mut part[index];
            }
            index -= part.len();
        }
        panic!("parameter index out of range");
    }

    pub fn get(&self, mut index: usize) -> f64 {
        for part in [self.w1.as_slice(), self.b1.as_slice(), self.w2.as_slice(), self.b2.as_slice()] {
            if index < part.len() {
                return part[index];
            }
            index -= part.len();
        }
        panic!("parameter index out of range");
    }

    fn parts_mut(&mut self) -> [&mut [f64]; 4] {
        [self.w1.as_mut_slice(), self.b1.as_mut_slice(), self.w2.as_mut_slice(), self.b2.as_mut_slice()]
    }
}

/// Mean cross-entropy of `params` on rows `x` with class indices `y`, and its
/// gradient.
pub fn loss_and_gradient(params: &MlpParams, x: &DMatrix<f64>, y: &[usize]) -> (f64, MlpParams) {
    let n = x.nrows() as f64;
    // Row-major batches: z1 is batch x hidden.
    let mut z1 = x * params.w1.transpose();
    for mut row in z1.row_iter_mut() {
        row += params.b1.transpose();
    }
    let a1 = z1.map(|v| v.max(0.0));
    let mut z2 = &a1 * params.w2.transpose();
    for mut row in z2.row_iter_mut() {
        row += params.b2.transpose();
    }

    let mut loss = 0.0;
    let mut dz2 = DMatrix::zeros(z2.nrows(), z2.ncols());
    for (r, row) in z2.row_iter().enumerate() {
        let max = row.max();
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        loss -= (exps[y[r]] / total).ln();
        for (c, e) in exps.iter().enumerate() {
            let target = if c == y[r] { 1.0 } else { 0.0 };
            dz2[(r, c)] = (e / total - target) / n;
        }
    }
    loss /= n;

    let w2 = dz2.transpose() * &a1;
    let b2 = dz2.row_sum().transpose();
    let mut dz1 = &dz2 * &params.w2;
    dz1.zip_apply(&z1, |g, z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    let w1 = dz1.transpose() * x;
    let b1 = dz1.row_sum().transpose();
    (loss, MlpParams { w1, b1, w2, b2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub classes: Vec<Label>,
    pub params: MlpParams,
}

impl MlpModel {
    pub(super) fn fit(set: &LabeledSet, classes: Vec<Label>, settings: &MlpSettings, rng_seed: u64) -> Result<Self> {
        let y: Vec<usize> = set
            .labels
            .iter()
            .map(|l| classes.binary_search(l).expect("class collected from labels"))
            .collect();
        let mut params = MlpParams::random(set.dim(), settings.hidden, classes.len(), rng_seed);
        let mut m = MlpParams::zeros(set.dim(), settings.hidden, classes.len());
        let mut v = m.clone();
        let mut rng = rng_from_seed(rng_seed.wrapping_add(1));
        let mut order: Vec<usize> = (0..set.len()).collect();
        let mut step = 0i32;

        for _ in 0..settings.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(settings.batch.max(1)) {
                let x = set.coords.select_rows(batch);
                let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
                let (_, mut grad) = loss_and_gradient(&params, &x, &yb);
                step += 1;
                let c1 = 1.0 - settings.beta1.powi(step);
                let c2 = 1.0 - settings.beta2.powi(step);
                for ((p, g), (mp, vp)) in params
                    .parts_mut()
                    .into_iter()
                    .zip(grad.parts_mut())
                    .zip(m.parts_mut().into_iter().zip(v.parts_mut()))
                {
                    for k in 0..p.len() {
                        mp[k] = settings.beta1 * mp[k] + (1.0 - settings.beta1) * g[k];
                        vp[k] = settings.beta2 * vp[k] + (1.0 - settings.beta2) * g[k] * g[k];
                        let m_hat = mp[k] / c1;
                        let v_hat = vp[k] / c2;
                        p[k] -= settings.lr * m_hat / (v_hat.sqrt() + settings.eps);
                    }
                }
            }
        }
        Ok(Self { classes, params })
    }

    pub fn dim(&self) -> usize {
        self.params.w1.ncols()
    }

    /// Pre-softmax scores, one column per class.
    pub fn logits(&self, coords: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z1 = coords * self.params.w1.transpose();
        for mut row in z1.row_iter_mut() {
            row += self.params.b1.transpose();
        }
        z1.apply(|v| *v = v.max(0.0));
        let mut z2 = z1 * self.params.w2.transpose();
        for mut row in z2.row_iter_mut() {
            row += self.params.b2.transpose();
        }
        z2
    }

    pub(super) fn predict(&self, coords: &DMatrix<f64>) -> Vec<Label> {
        self.logits(coords)
            .row_iter()
            .map(|row| self.classes[argmax(row.iter().copied())].clone())
            .collect()
    }
}
