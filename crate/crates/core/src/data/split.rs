use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{Corpus, Split};
use crate::error::{Result, SsaError};
use crate::rng::{derive_seed, rng_from_seed};
use crate::Label;

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.8, 0.1, 0.1);

/// Stratified train/dev/test assignment per step and class. Dev and test get
/// `floor(n * fraction)` rows; the rounding residue stays in train.
pub fn split_corpus(corpus: &Corpus, fractions: (f64, f64, f64), rng_seed: u64) -> Result<Corpus> {
    let (train, dev, test) = fractions;
    if [train, dev, test].iter().any(|f| !(0.0..=1.0).contains(f)) || (train + dev + test - 1.0).abs() > 1e-9 {
        return Err(SsaError::InvalidConfig(format!(
            "split fractions {train}/{dev}/{test} must be in [0, 1] and sum to 1"
        )));
    }
    let mut out = corpus.clone();
    for step in corpus.steps() {
        let mut strata: BTreeMap<Option<&Label>, Vec<usize>> = BTreeMap::new();
        for (i, r) in corpus.records.iter().enumerate().filter(|(_, r)| r.step == step) {
            strata.entry(r.label.as_ref()).or_default().push(i);
        }
        if strata.is_empty() {
            return Err(SsaError::EmptyStep(step));
        }
        for (label, mut rows) in strata {
            let tag = label.map_or(String::new(), |l| format!("={l}"));
            let mut rng = rng_from_seed(derive_seed(rng_seed, &["split", &step.to_string(), &tag]));
            rows.shuffle(&mut rng);
            let n = rows.len() as f64;
            let (exact_test, exact_dev) = (n * test + 1e-9, n * dev + 1e-9);
            let mut n_test = exact_test.floor() as usize;
            let mut n_dev = exact_dev.floor() as usize;
            // Train absorbs the residue, but never more than one row of it.
            if exact_test.fract() + exact_dev.fract() > 1.0 + 1e-9 {
                if exact_test.fract() >= exact_dev.fract() {
                    n_test += 1;
                } else {
                    n_dev += 1;
                }
            }
            for (k, &i) in rows.iter().enumerate() {
                out.records[i].split = if k < n_test {
                    Split::Test
                } else if k < n_test + n_dev {
                    Split::Dev
                } else {
                    Split::Train
                };
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{EmbeddingRecord, Manifest};
    use super::*;

    fn corpus(counts: &[(&str, usize)]) -> Corpus {
        let mut records = Vec::new();
        for (label, n) in counts {
            for i in 0..*n {
                records.push(EmbeddingRecord {
                    id: format!("{label}{i}"),
                    step: 0,
                    split: Split::Train,
                    label: Some(label.to_string()),
                    vector: vec![i as f64],
                });
            }
        }
        let manifest = Manifest {
            dimension: 1,
            steps: BTreeMap::from([(0, "only".to_string())]),
            labels: counts.iter().map(|(l, _)| l.to_string()).collect(),
        };
        Corpus::new(records, manifest).unwrap()
    }

    fn counts(c: &Corpus, label: Option<&str>) -> (usize, usize, usize) {
        let rows = c.records.iter().filter(|r| label.is_none() || r.label.as_deref() == label);
        rows.fold((0, 0, 0), |(a, b, t), r| match r.split {
            Split::Train => (a + 1, b, t),
            Split::Dev => (a, b + 1, t),
            Split::Test => (a, b, t + 1),
        })
    }

    #[test]
    fn ten_rows_split_8_1_1() {
        let c = split_corpus(&corpus(&[("A", 10)]), DEFAULT_FRACTIONS, 0).unwrap();
        assert_eq!(counts(&c, None), (8, 1, 1));
    }

    #[test]
    fn residue_goes_to_train() {
        let c = split_corpus(&corpus(&[("A", 3)]), DEFAULT_FRACTIONS, 0).unwrap();
        assert_eq!(counts(&c, None), (3, 0, 0));
    }

    #[test]
    fn stratified_per_class() {
        let c = split_corpus(&corpus(&[("A", 50), ("B", 50)]), DEFAULT_FRACTIONS, 3).unwrap();
        let (a, b) = (counts(&c, Some("A")), counts(&c, Some("B")));
        assert_eq!(a, (40, 5, 5));
        assert_eq!(b, (40, 5, 5));
    }

    #[test]
    fn bad_fractions_and_empty_steps() {
        assert!(split_corpus(&corpus(&[("A", 3)]), (0.5, 0.1, 0.1), 0).is_err());
        let mut c = corpus(&[("A", 3)]);
        c.manifest.steps.insert(1, "empty".into());
        assert!(matches!(split_corpus(&c, DEFAULT_FRACTIONS, 0), Err(SsaError::EmptyStep(1))));
    }

    #[test]
    fn seeded_and_overwrites_existing_splits() {
        let mut c = corpus(&[("A", 20)]);
        for r in &mut c.records {
            r.split = Split::Test;
        }
        let a = split_corpus(&c, DEFAULT_FRACTIONS, 11).unwrap();
        assert_eq!(a, split_corpus(&c, DEFAULT_FRACTIONS, 11).unwrap());
        assert_eq!(counts(&a, None), (16, 2, 2));
    }
}
