use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::LabeledSet;
use crate::error::{Result, SsaError};
use crate::rng::rng_from_seed;
use crate::Label;

/// Resamples every minority class with replacement up to the majority count,
/// then shuffles the rows. Original rows are all kept.
pub fn oversample(set: &LabeledSet, rng_seed: u64) -> Result<LabeledSet> {
    if set.is_empty() {
        return Err(SsaError::EmptyClass("<none>".into()));
    }
    let mut by_class: BTreeMap<&Label, Vec<usize>> = BTreeMap::new();
    for (i, l) in set.labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let majority = by_class.values().map(Vec::len).max().unwrap_or(0);

    let mut rng = rng_from_seed(rng_seed);
    let mut rows: Vec<usize> = (0..set.len()).collect();
    for members in by_class.values() {
        for _ in members.len()..majority {
            rows.push(members[rng.random_range(0..members.len())]);
        }
    }
    rows.shuffle(&mut rng);

    LabeledSet::new(
        set.coords.select_rows(&rows),
        rows.iter().map(|&i| set.labels[i].clone()).collect(),
    )
}
