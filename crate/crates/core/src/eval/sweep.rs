use rayon::prelude::*;
use serde::Serialize;

use super::{run_mode, Metric, Mode, RunConfig};
use crate::data::Corpus;
use crate::error::{Result, SsaError};
use crate::rng::derive_seed;

pub const DEFAULT_REPETITIONS: usize = 5;

/// Normal quantile for a two-sided 95% interval.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub m: usize,
    pub mean: f64,
    /// Sample standard deviation over repetitions (0 for a single one).
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    /// Per repetition, averaged over test steps.
    pub values: Vec<f64>,
}

/// Semi-supervised mode at each seeds-per-class value in `m_grid`, repeated
/// with `repetitions` seeds. Repetition `r` uses the same derived seed for
/// every `m`, so points are paired.
pub fn sweep_seeds(
    corpus: &Corpus,
    config: &RunConfig,
    m_grid: &[usize],
    repetitions: usize,
    metric: Metric,
) -> Result<Vec<SweepPoint>> {
    if m_grid.is_empty() || m_grid.contains(&0) || repetitions == 0 {
        return Err(SsaError::InvalidConfig(
            "sweep needs a non-empty grid of positive m and at least one repetition".into(),
        ));
    }
    let steps = corpus.steps();
    if steps.len() < 2 {
        return Err(SsaError::TooFewSteps(steps.len()));
    }
    let jobs: Vec<(usize, usize)> = m_grid.iter().flat_map(|&m| (0..repetitions).map(move |r| (m, r))).collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(m, r)| {
            let cfg = RunConfig {
                seeds_per_class: m,
                modes: vec![Mode::Semi],
                rng_seed: derive_seed(config.rng_seed, &["repetition", &r.to_string()]),
                ..config.clone()
            };
            let mut total = 0.0;
            for &step in &steps[1..] {
                total += metric.of(&run_mode(corpus, step, Mode::Semi, &cfg)?.metrics);
            }
            Ok(total / (steps.len() - 1) as f64)
        })
        .collect::<Result<_>>()?;

    Ok(m_grid
        .iter()
        .zip(values.chunks(repetitions))
        .map(|(&m, vals)| {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let half = Z95 * sd / n.sqrt();
            SweepPoint {
                m,
                mean,
                sd,
                lower: mean - half,
                upper: mean + half,
                values: vals.to_vec(),
            }
        })
        .collect())
}

/// `m,mean,sd,lower,upper,repetitions` table.
pub fn render_sweep(points: &[SweepPoint]) -> String {
    let mut out = String::from("m,mean,sd,lower,upper,repetitions\n");
    for p in points {
        out.push_str(&format!("{},{},{},{},{},{}\n", p.m, p.mean, p.sd, p.lower, p.upper, p.values.len()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::ClassifierSpec;
    use crate::data::{generate_synthetic, split_corpus, Preset, SynthConfig, DEFAULT_FRACTIONS};

    fn corpus() -> Corpus {
        let mut cfg = SynthConfig::new(Preset::ClassSwap, 2);
        cfg.steps = 2;
        cfg.dim = 3;
        cfg.per_class = 30;
        cfg.separation = 8.0;
        split_corpus(&generate_synthetic(&cfg).unwrap(), DEFAULT_FRACTIONS, 0).unwrap()
    }

    #[test]
    fn band_matches_hand_computation() {
        let config = RunConfig {
            d: 2,
            classifier: ClassifierSpec::Knn { k: 1 },
            ..RunConfig::default()
        };
        let points = sweep_seeds(&corpus(), &config, &[1, 3], 3, Metric::Accuracy).unwrap();
        assert_eq!(points.len(), 2);
        for p in &points {
            let n = p.values.len() as f64;
            let mean = p.values.iter().sum::<f64>() / n;
            let var = p.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            assert_close!(p.mean, mean, 1e-12);
            assert_close!(p.upper - p.mean, 1.96 * var.sqrt() / n.sqrt(), 1e-4 * (1.0 + var.sqrt()));
            assert!(p.lower <= p.mean && p.mean <= p.upper);
        }
        let table = render_sweep(&points);
        assert!(table.starts_with("m,mean,sd,lower,upper,repetitions\n1,"));
    }

    #[test]
    fn rejects_empty_grid() {
        let config = RunConfig::default();
        assert!(sweep_seeds(&corpus(), &config, &[], 5, Metric::Accuracy).is_err());
        assert!(sweep_seeds(&corpus(), &config, &[0], 5, Metric::Accuracy).is_err());
    }
}
