//! Downstream classifiers over aligned coordinates, plus minority-class
//! oversampling.

mod mlp;
mod neighbors;
mod oversample;
mod svm;

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Serialize;

pub use mlp::{loss_and_gradient, MlpModel, MlpParams, MlpSettings};
pub use neighbors::{CentroidModel, KnnModel};
pub use oversample::oversample;
pub use svm::{kkt_gap, rbf_kernel, BinarySvm, SvmModel, SvmSettings};

use crate::error::{Result, SsaError};
use crate::Label;

/// Coordinates with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub coords: DMatrix<f64>,
    pub labels: Vec<Label>,
}

impl LabeledSet {
    pub fn new(coords: DMatrix<f64>, labels: Vec<Label>) -> Result<Self> {
        if coords.nrows() != labels.len() {
            return Err(SsaError::LengthMismatch {
                left: coords.nrows(),
                right: labels.len(),
            });
        }
        Ok(Self { coords, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<Label> {
        self.labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Rows stacked below one another; column counts must agree.
    pub fn concat(parts: &[LabeledSet]) -> Result<Self> {
        let dim = parts.iter().find(|p| !p.is_empty()).map_or(0, LabeledSet::dim);
        let n: usize = parts.iter().map(LabeledSet::len).sum();
        let mut coords = DMatrix::zeros(n, dim);
        let mut labels = Vec::with_capacity(n);
        let mut row = 0;
        for p in parts.iter().filter(|p| !p.is_empty()) {
            if p.dim() != dim {
                return Err(SsaError::DimensionMismatch { expected: dim, got: p.dim() });
            }
            coords.rows_mut(row, p.len()).copy_from(&p.coords);
            labels.extend(p.labels.iter().cloned());
            row += p.len();
        }
        Ok(Self { coords, labels })
    }

    fn require_rows(&self) -> Result<()> {
        if self.is_empty() {
            Err(SsaError::EmptyInput("training set".into()))
        } else {
            Ok(())
        }
    }

    fn require_two_classes(&self) -> Result<Vec<Label>> {
        self.require_rows()?;
        let classes = self.classes();
        if classes.len() < 2 {
            Err(SsaError::SingleClass)
        } else {
            Ok(classes)
        }
    }
}

/// Which classifier to train, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Knn { k: usize },
    Centroid,
    Svm(SvmSettings),
    Mlp(MlpSettings),
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Knn { .. } => "knn",
            ClassifierSpec::Centroid => "centroid",
            ClassifierSpec::Svm(_) => "svm",
            ClassifierSpec::Mlp(_) => "mlp",
        }
    }

    pub fn fit(&self, set: &LabeledSet, rng_seed: u64) -> Result<ClassifierModel> {
        Ok(match self {
            ClassifierSpec::Knn { k } => ClassifierModel::Knn(fit_knn(set, *k)?),
            ClassifierSpec::Centroid => ClassifierModel::Centroid(fit_centroid(set)?),
            ClassifierSpec::Svm(s) => ClassifierModel::Svm(fit_svm_rbf(set, s)?),
            ClassifierSpec::Mlp(s) => ClassifierModel::Mlp(fit_mlp(set, s, rng_seed)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierModel {
    Knn(KnnModel),
    Centroid(CentroidModel),
    Svm(SvmModel),
    Mlp(MlpModel),
}

impl ClassifierModel {
    pub fn dim(&self) -> usize {
        match self {
            ClassifierModel::Knn(m) => m.dim(),
            ClassifierModel::Centroid(m) => m.dim(),
            ClassifierModel::Svm(m) => m.dim(),
            ClassifierModel::Mlp(m) => m.dim(),
        }
    }

    pub fn predict(&self, coords: &DMatrix<f64>) -> Result<Vec<Label>> {
        predict(self, coords)
    }
}

pub fn fit_knn(set: &LabeledSet, k: usize) -> Result<KnnModel> {
    set.require_rows()?;
    KnnModel::fit(set, k)
}

pub fn fit_centroid(set: &LabeledSet) -> Result<CentroidModel> {
    set.require_rows()?;
    Ok(CentroidModel::fit(set))
}

pub fn fit_svm_rbf(set: &LabeledSet, settings: &SvmSettings) -> Result<SvmModel> {
    let classes = set.require_two_classes()?;
    SvmModel::fit(set, classes, settings)
}

pub fn fit_mlp(set: &LabeledSet, settings: &MlpSettings, rng_seed: u64) -> Result<MlpModel> {
    let classes = set.require_two_classes()?;
    MlpModel::fit(set, classes, settings, rng_seed)
}

pub fn predict(model: &ClassifierModel, coords: &DMatrix<f64>) -> Result<Vec<Label>> {
    if coords.ncols() != model.dim() {
        return Err(SsaError::DimensionMismatch {
            expected: model.dim(),
            got: coords.ncols(),
        });
    }
    Ok(match model {
        ClassifierModel::Knn(m) => m.predict(coords),
        ClassifierModel::Centroid(m) => m.predict(coords),
        ClassifierModel::Svm(m) => m.predict(coords),
        ClassifierModel::Mlp(m) => m.predict(coords),
    })
}

/// Index of the first maximum.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub(crate) fn row_sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    a.row(i).iter().zip(b.row(j).iter()).map(|(p, q)| (p - q) * (p - q)).sum()
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_checks_dimension() {
        let set = fixtures::blobs(5, 4.0, 0.1, 0);
        let model = ClassifierSpec::Centroid.fit(&set, 0).unwrap();
        assert!(matches!(
            model.predict(&DMatrix::zeros(1, 3)),
            Err(SsaError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn two_class_trainers_reject_single_class() {
        let set = LabeledSet::new(DMatrix::zeros(3, 2), vec!["A".into(); 3]).unwrap();
        assert!(matches!(fit_svm_rbf(&set, &SvmSettings::default()), Err(SsaError::SingleClass)));
        assert!(matches!(fit_mlp(&set, &MlpSettings::default(), 0), Err(SsaError::SingleClass)));
        let empty = LabeledSet::new(DMatrix::zeros(0, 2), vec![]).unwrap();
        assert!(fit_knn(&empty, 1).is_err());
        assert!(fit_centroid(&empty).is_err());
    }

    #[test]
    fn concat_stacks_rows() {
        let a = fixtures::blobs(2, 4.0, 0.1, 0);
        let b = fixtures::blobs(1, 4.0, 0.1, 1);
        let c = LabeledSet::concat(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c.coords.row(4), b.coords.row(0));
        assert_eq!(&c.labels[..4], &a.labels[..]);
    }
}
