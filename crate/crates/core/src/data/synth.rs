//! Synthetic drifting corpora: isotropic Gaussian classes whose means move
//! across steps according to a preset.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand_distr::{Cauchy, Distribution, StandardNormal};

use super::{Corpus, EmbeddingRecord, Manifest, Split};
use crate::error::{Result, SsaError};
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Every class moves by `drift * sigma` per step along one fixed direction.
    GlobalShift,
    /// Classes 0 and 1 trade means at the final step.
    ClassSwap,
    /// Class means rotate by `drift` radians per step in a fixed plane.
    GradualRotation,
    /// Like rotation, but per-step angles are `drift * |Cauchy|`, capped at pi/2.
    Irregular,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::GlobalShift, Preset::ClassSwap, Preset::GradualRotation, Preset::Irregular];

    pub fn name(self) -> &'static str {
        match self {
            Preset::GlobalShift => "global-shift",
            Preset::ClassSwap => "class-swap",
            Preset::GradualRotation => "gradual-rotation",
            Preset::Irregular => "irregular",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = SsaError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SsaError::InvalidConfig(format!("unknown preset `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub preset: Preset,
    pub dim: usize,
    pub classes: usize,
    pub per_class: usize,
    pub steps: usize,
    /// Distance between class means, in units of `sigma`.
    pub separation: f64,
    pub sigma: f64,
    pub drift: f64,
    pub rng_seed: u64,
}

impl SynthConfig {
    pub fn new(preset: Preset, rng_seed: u64) -> Self {
        Self {
            preset,
            dim: 10,
            classes: 2,
            per_class: 100,
            steps: 4,
            separation: 4.0,
            sigma: 1.0,
            drift: 0.5,
            rng_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(SsaError::InvalidConfig(msg.to_string()));
        if self.dim == 0 || self.per_class == 0 || self.steps == 0 {
            return bad("dim, per-class and steps must be positive");
        }
        if self.classes < 2 {
            return bad("at least two classes are needed");
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return bad("separation must be positive");
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.drift.is_finite() && self.drift >= 0.0) {
            return bad("drift must be non-negative");
        }
        if matches!(self.preset, Preset::GradualRotation | Preset::Irregular) && self.dim < 2 {
            return bad("rotation presets need dim >= 2");
        }
        Ok(())
    }

    fn sub_rng(&self, tag: &str) -> Rng {
        rng_from_seed(derive_seed(self.rng_seed, &["synth", tag]))
    }

    fn base_means(&self) -> Vec<DVector<f64>> {
        let r = self.separation * self.sigma / SQRT_2;
        if self.classes <= self.dim {
            return (0..self.classes).map(|c| DVector::from_fn(self.dim, |j, _| if j == c { r } else { 0.0 })).collect();
        }
        let mut rng = self.sub_rng("means");
        (0..self.classes).map(|_| unit_vector(self.dim, &mut rng) * r).collect()
    }

    /// Rotation angle of each step relative to step 0.
    fn angles(&self) -> Vec<f64> {
        match self.preset {
            Preset::GradualRotation => (0..self.steps).map(|t| self.drift * t as f64).collect(),
            Preset::Irregular => {
                let mut rng = self.sub_rng("angles");
                let cauchy = Cauchy::new(0.0, 1.0).expect("unit scale");
                let mut total = 0.0;
                (0..self.steps)
                    .map(|t| {
                        if t > 0 {
                            let step: f64 = cauchy.sample(&mut rng);
                            total += (self.drift * step.abs()).min(FRAC_PI_2);
                        }
                        total
                    })
                    .collect()
            }
            _ => vec![0.0; self.steps],
        }
    }

    /// True class means at every step.
    pub fn class_means(&self) -> Result<Vec<Vec<DVector<f64>>>> {
        self.validate()?;
        let base = self.base_means();
        let out = match self.preset {
            Preset::GlobalShift => {
                let u = unit_vector(self.dim, &mut self.sub_rng("shift"));
                (0..self.steps)
                    .map(|t| {
                        let offset = &u * (t as f64 * self.drift * self.sigma);
                        base.iter().map(|m| m + &offset).collect()
                    })
                    .collect()
            }
            Preset::ClassSwap => (0..self.steps)
                .map(|t| {
                    let mut means = base.clone();
                    if t + 1 == self.steps {
                        means.swap(0, 1);
                    }
                    means
                })
                .collect(),
            Preset::GradualRotation | Preset::Irregular => {
                let (p, q) = rotation_plane(self)?;
                self.angles()
                    .into_iter()
                    .map(|theta| base.iter().map(|m| rotate(m, &p, &q, theta)).collect())
                    .collect()
            }
        };
        Ok(out)
    }
}

fn unit_vector(dim: usize, rng: &mut Rng) -> DVector<f64> {
    loop {
        let v = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Orthonormal pair spanning the plane the rotation presets turn in. The plane
/// lies inside the coordinates holding the class means.
pub fn rotation_plane(config: &SynthConfig) -> Result<(DVector<f64>, DVector<f64>)> {
    config.validate()?;
    if config.dim < 2 {
        return Err(SsaError::InvalidConfig("rotation needs dim >= 2".into()));
    }
    let span = config.classes.clamp(2, config.dim);
    let mut rng = config.sub_rng("plane");
    let embed = |v: DVector<f64>| DVector::from_fn(config.dim, |j, _| if j < span { v[j] } else { 0.0 });
    let p = embed(unit_vector(span, &mut rng));
    loop {
        let mut q = embed(unit_vector(span, &mut rng));
        q -= &p * p.dot(&q);
        let norm = q.norm();
        if norm > 1e-6 {
            return Ok((p, q / norm));
        }
    }
}

fn rotate(v: &DVector<f64>, p: &DVector<f64>, q: &DVector<f64>, theta: f64) -> DVector<f64> {
    let (a, b) = (p.dot(v), q.dot(v));
    let (s, c) = theta.sin_cos();
    v + p * (a * (c - 1.0) - b * s) + q * (a * s + b * (c - 1.0))
}

/// Draws `per_class` rows per class per step. Every row is labeled and in the
/// train split; run a split afterwards for train/dev/test.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Corpus> {
    let means = config.class_means()?;
    let mut rng = config.sub_rng("samples");
    let width = (config.classes - 1).to_string().len();
    let labels: Vec<String> = (0..config.classes).map(|c| format!("c{c:0width$}")).collect();
    let mut records = Vec::with_capacity(config.steps * config.classes * config.per_class);
    for (t, step_means) in means.iter().enumerate() {
        for (c, mean) in step_means.iter().enumerate() {
            for i in 0..config.per_class {
                let vector = mean
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + config.sigma * z
                    })
                    .collect();
                records.push(EmbeddingRecord {
                    id: format!("t{t}-{}-{i}", labels[c]),
                    step: t as u32,
                    split: Split::Train,
                    label: Some(labels[c].clone()),
                    vector,
                });
            }
        }
    }
    let manifest = Manifest {
        dimension: config.dim,
        steps: (0..config.steps as u32).map(|t| (t, format!("step{t}"))).collect::<BTreeMap<_, _>>(),
        labels,
    };
    Corpus::new(records, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empirical_mean(c: &Corpus, step: u32, label: &str) -> DVector<f64> {
        let rows: Vec<&EmbeddingRecord> =
            c.records.iter().filter(|r| r.step == step && r.label.as_deref() == Some(label)).collect();
        let sum = rows.iter().fold(DVector::zeros(c.dim()), |acc, r| acc + DVector::from_column_slice(&r.vector));
        sum / rows.len() as f64
    }

    #[test]
    fn shape_labels_and_determinism() {
        let mut cfg = SynthConfig::new(Preset::Irregular, 5);
        cfg.classes = 12;
        cfg.per_class = 3;
        cfg.steps = 3;
        let c = generate_synthetic(&cfg).unwrap();
        assert_eq!(c.records.len(), 3 * 12 * 3);
        assert_eq!(c.manifest.labels[2], "c02");
        assert_eq!(c, generate_synthetic(&cfg).unwrap());
        cfg.rng_seed = 6;
        assert_ne!(c, generate_synthetic(&cfg).unwrap());
    }

    #[test]
    fn class_swap_moves_a_to_b() {
        let mut cfg = SynthConfig::new(Preset::ClassSwap, 1);
        cfg.steps = 3;
        cfg.per_class = 400;
        let c = generate_synthetic(&cfg).unwrap();
        let late_a = empirical_mean(&c, 2, "c0");
        let early_b = empirical_mean(&c, 0, "c1");
        assert!((late_a - early_b).norm() < cfg.sigma);
    }

    #[test]
    fn rotation_means_follow_the_plane() {
        let mut cfg = SynthConfig::new(Preset::GradualRotation, 2);
        cfg.dim = 5;
        cfg.steps = 3;
        cfg.drift = 0.7;
        cfg.per_class = 500;
        let c = generate_synthetic(&cfg).unwrap();
        let (p, q) = rotation_plane(&cfg).unwrap();
        assert!((p.dot(&q)).abs() < 1e-12 && (p.norm() - 1.0).abs() < 1e-12);
        let r = cfg.separation * cfg.sigma / SQRT_2;
        let tol = 3.0 * cfg.sigma / (cfg.per_class as f64).sqrt();
        for t in 0..3u32 {
            let theta = cfg.drift * t as f64;
            for (k, label) in ["c0", "c1"].iter().enumerate() {
                let mut e = DVector::zeros(5);
                e[k] = r;
                // Rotation written out with an explicit 2x2 block in the (p, q) basis.
                let (a, b) = (p.dot(&e), q.dot(&e));
                let rest = &e - &p * a - &q * b;
                let expected = rest + &p * (a * theta.cos() - b * theta.sin()) + &q * (a * theta.sin() + b * theta.cos());
                let got = empirical_mean(&c, t, label);
                for j in 0..5 {
                    assert!((got[j] - expected[j]).abs() < tol, "step {t} {label} coord {j}");
                }
            }
        }
    }

    #[test]
    fn global_shift_is_linear_in_time() {
        let mut cfg = SynthConfig::new(Preset::GlobalShift, 3);
        cfg.steps = 4;
        cfg.drift = 2.0;
        let means = cfg.class_means().unwrap();
        let d1 = &means[1][0] - &means[0][0];
        let d3 = &means[3][1] - &means[0][1];
        assert!((d1.norm() - 2.0).abs() < 1e-12);
        assert!((d3 - d1 * 3.0).norm() < 1e-12);
    }

    #[test]
    fn irregular_angles_are_capped_and_increasing() {
        let mut cfg = SynthConfig::new(Preset::Irregular, 4);
        cfg.steps = 20;
        cfg.drift = 5.0;
        let a = cfg.angles();
        assert_eq!(a[0], 0.0);
        for w in a.windows(2) {
            assert!(w[1] >= w[0] && w[1] - w[0] <= FRAC_PI_2 + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = SynthConfig::new(Preset::GlobalShift, 0);
        cfg.classes = 1;
        assert!(matches!(generate_synthetic(&cfg), Err(SsaError::InvalidConfig(_))));
        let mut cfg = SynthConfig::new(Preset::GradualRotation, 0);
        cfg.dim = 1;
        assert!(generate_synthetic(&cfg).is_err());
        let mut cfg = SynthConfig::new(Preset::GlobalShift, 0);
        cfg.sigma = 0.0;
        assert!(generate_synthetic(&cfg).is_err());
        assert!("spiral".parse::<Preset>().is_err());
        assert_eq!("class-swap".parse::<Preset>().unwrap(), Preset::ClassSwap);
    }
}
