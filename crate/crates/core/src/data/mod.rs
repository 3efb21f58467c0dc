//! Corpus model: timestamped, optionally labeled embedding records plus a
//! manifest naming the steps and the label inventory.

mod io;
mod split;
mod synth;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

pub use io::{
    parse_data, parse_manifest, read_corpus, render_data, render_manifest, write_corpus, write_corpus_to,
};
pub use split::{split_corpus, DEFAULT_FRACTIONS};
pub use synth::{generate_synthetic, rotation_plane, Preset, SynthConfig};

use crate::error::{Result, SsaError};
use crate::linalg::SampleMatrix;
use crate::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = SsaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(SsaError::Parse(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub step: u32,
    pub split: Split,
    pub label: Option<Label>,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub dimension: usize,
    /// Step index -> display name (a year, a rumour name, ...).
    pub steps: BTreeMap<u32, String>,
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub records: Vec<EmbeddingRecord>,
    pub manifest: Manifest,
}

impl Corpus {
    /// Builds a corpus and checks it against its manifest.
    pub fn new(records: Vec<EmbeddingRecord>, manifest: Manifest) -> Result<Self> {
        let corpus = Self { records, manifest };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        let labels: HashSet<&Label> = self.manifest.labels.iter().collect();
        let mut ids = HashSet::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            if !ids.insert(r.id.as_str()) {
                return Err(SsaError::DuplicateId(r.id.clone()));
            }
            if !self.manifest.steps.contains_key(&r.step) {
                return Err(SsaError::UnknownStep {
                    id: r.id.clone(),
                    step: r.step,
                });
            }
            if let Some(l) = &r.label {
                if !labels.contains(l) {
                    return Err(SsaError::UnknownLabel {
                        id: r.id.clone(),
                        label: l.clone(),
                    });
                }
            }
            if r.vector.len() != self.manifest.dimension {
                return Err(SsaError::RaggedRow {
                    line: i + 2,
                    expected: self.manifest.dimension + 4,
                    got: r.vector.len() + 4,
                });
            }
            if r.vector.iter().any(|v| !v.is_finite()) {
                return Err(SsaError::NonFinite);
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.manifest.dimension
    }

    /// Step indices in chronological order.
    pub fn steps(&self) -> Vec<u32> {
        self.manifest.steps.keys().copied().collect()
    }

    pub fn step_name(&self, step: u32) -> &str {
        self.manifest.steps.get(&step).map_or("", String::as_str)
    }

    /// Indices of records at `step`, optionally restricted to one split.
    pub fn select(&self, step: u32, split: Option<Split>) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.step == step && split.is_none_or(|s| r.split == s))
            .map(|(i, _)| i)
            .collect()
    }

    /// Vectors of the given records as a sample matrix.
    pub fn matrix(&self, rows: &[usize]) -> Result<SampleMatrix> {
        let dim = self.dim();
        SampleMatrix::new(DMatrix::from_fn(rows.len(), dim, |i, j| self.records[rows[i]].vector[j]))
    }

    /// `step -> label -> count`, with `None` for unlabeled rows.
    pub fn class_counts(&self) -> BTreeMap<u32, BTreeMap<Option<Label>, usize>> {
        let mut out: BTreeMap<u32, BTreeMap<Option<Label>, usize>> = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.step).or_default().entry(r.label.clone()).or_default() += 1;
        }
        out
    }

    /// Hex SHA-256 of the serialized manifest and data file.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(render_manifest(&self.manifest).as_bytes());
        h.update(render_data(self).as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny() -> Corpus {
        let manifest = Manifest {
            dimension: 2,
            steps: BTreeMap::from([(0, "2010".to_string()), (1, "2011".to_string())]),
            labels: vec!["accept".into(), "reject".into()],
        };
        let records = vec![
            EmbeddingRecord {
                id: "a".into(),
                step: 0,
                split: Split::Train,
                label: Some("accept".into()),
                vector: vec![0.5, -1.25],
            },
            EmbeddingRecord {
                id: "b".into(),
                step: 1,
                split: Split::Test,
                label: None,
                vector: vec![1.0, 2.0],
            },
        ];
        Corpus::new(records, manifest).unwrap()
    }

    #[test]
    fn validation_rejects_unknown_step_label_and_duplicates() {
        let good = tiny();
        let mut bad = good.clone();
        bad.records[1].step = 9;
        assert!(matches!(bad.validate(), Err(SsaError::UnknownStep { step: 9, .. })));
        let mut bad = good.clone();
        bad.records[0].label = Some("maybe".into());
        assert!(matches!(bad.validate(), Err(SsaError::UnknownLabel { .. })));
        let mut bad = good.clone();
        bad.records[1].id = "a".into();
        assert!(matches!(bad.validate(), Err(SsaError::DuplicateId(_))));
        let mut bad = good;
        bad.records[1].vector.push(0.0);
        assert!(matches!(bad.validate(), Err(SsaError::RaggedRow { .. })));
    }

    #[test]
    fn selection_and_counts() {
        let c = tiny();
        assert_eq!(c.select(0, None), vec![0]);
        assert_eq!(c.select(1, Some(Split::Train)), Vec::<usize>::new());
        assert_eq!(c.class_counts()[&1][&None], 1);
        assert_eq!(c.steps(), vec![0, 1]);
        assert_eq!(c.step_name(1), "2011");
        assert_eq!(c.digest(), tiny().digest());
    }

    #[test]
    fn split_parsing() {
        assert_eq!("dev".parse::<Split>().unwrap(), Split::Dev);
        assert!("validation".parse::<Split>().is_err());
    }
}
