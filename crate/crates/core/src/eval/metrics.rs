use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Result, SsaError};
use crate::Label;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Unweighted mean of `per_class_f1`.
    pub macro_f1: f64,
    /// F1 for every label present in the truth; 0/0 counts as 0.
    pub per_class_f1: BTreeMap<Label, f64>,
    /// Truth count per label.
    pub support: BTreeMap<Label, usize>,
}

pub fn metrics(predictions: &[Label], truth: &[Label]) -> Result<Metrics> {
    if predictions.len() != truth.len() {
        return Err(SsaError::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(SsaError::EmptyInput("evaluation set".into()));
    }
    let labels: BTreeSet<&Label> = truth.iter().collect();
    let mut per_class_f1 = BTreeMap::new();
    let mut support = BTreeMap::new();
    for &label in &labels {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (p, t) in predictions.iter().zip(truth) {
            match (p == label, t == label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        let f1 = if denom == 0 { 0.0 } else { (2 * tp) as f64 / denom as f64 };
        per_class_f1.insert(label.clone(), f1);
        support.insert(label.clone(), tp + fn_);
    }
    let correct = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(Metrics {
        accuracy: correct as f64 / truth.len() as f64,
        macro_f1: per_class_f1.values().sum::<f64>() / per_class_f1.len() as f64,
        per_class_f1,
        support,
    })
}
