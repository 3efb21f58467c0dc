#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use ssa_core::data::{generate_synthetic, split_corpus, Corpus, Preset, SynthConfig, DEFAULT_FRACTIONS};
use ssa_core::linalg::SampleMatrix;
use ssa_core::rng::{rng_from_seed, Rng};

pub fn gaussian(n: usize, dim: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, dim, |_, _| StandardNormal.sample(rng))
}

/// Gaussian rows with per-column scales drawn from `[0.5, 3)`, so the
/// covariance spectrum has no ties.
pub fn anisotropic(n: usize, dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    let scales: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..3.0)).collect();
    let mut x = gaussian(n, dim, &mut rng);
    for (j, s) in scales.iter().enumerate() {
        x.column_mut(j).scale_mut(*s);
    }
    x
}

pub fn samples(x: DMatrix<f64>) -> SampleMatrix {
    SampleMatrix::new(x).unwrap()
}

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Synthetic corpus with the default 80/10/10 split applied.
pub fn corpus(preset: Preset, seed: u64, tweak: impl FnOnce(&mut SynthConfig)) -> Corpus {
    let mut cfg = SynthConfig::new(preset, seed);
    tweak(&mut cfg);
    split_corpus(&generate_synthetic(&cfg).unwrap(), DEFAULT_FRACTIONS, seed).unwrap()
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Mean of the selected rows.
pub fn rows_mean(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(1, x.ncols());
    for &r in rows {
        out += x.row(r);
    }
    out / rows.len() as f64
}
