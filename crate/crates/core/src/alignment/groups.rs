use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Result, SsaError};
use crate::Label;

/// Alignment group: a class, optionally refined by a cluster id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub label: Label,
    pub cluster: Option<usize>,
}

impl GroupKey {
    pub fn new(label: impl Into<Label>, cluster: Option<usize>) -> Self {
        Self {
            label: label.into(),
            cluster,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    /// Final group of every row.
    pub keys: Vec<GroupKey>,
    /// Group -> row indices, ascending.
    pub roster: BTreeMap<GroupKey, Vec<usize>>,
    /// Group -> subspace dimension to use for that group.
    pub dims: BTreeMap<GroupKey, usize>,
}

impl GroupAssignment {
    pub fn len(&self) -> usize {
        self.roster.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roster.is_empty()
    }
}

/// Smallest group size that supports a `d`-dimensional PCA.
pub fn min_group_size(d: usize) -> usize {
    (d + 1).max(2)
}

/// Groups rows by `(label, cluster)` (or by label alone without clusters).
/// Groups below [`min_group_size`] are merged into the largest group of the
/// same label; a class too small overall gets a reduced dimension.
pub fn make_groups(labels: &[Label], cluster_ids: Option<&[usize]>, d: usize) -> Result<GroupAssignment> {
    let mut out = make_matched_groups(&[(labels, cluster_ids)], d)?;
    Ok(out.remove(0))
}

/// [`make_groups`] across several domains at once so the resulting keys match:
/// a group counts as large enough only if it is large enough in every domain,
/// and merge targets are chosen by the combined size.
pub fn make_matched_groups(
    domains: &[(&[Label], Option<&[usize]>)],
    d: usize,
) -> Result<Vec<GroupAssignment>> {
    if domains.is_empty() || domains.iter().all(|(l, _)| l.is_empty()) {
        return Err(SsaError::EmptyInput("labels".into()));
    }
    for (labels, clusters) in domains {
        if let Some(c) = clusters {
            if c.len() != labels.len() {
                return Err(SsaError::LengthMismatch {
                    left: labels.len(),
                    right: c.len(),
                });
            }
        }
    }
    let threshold = min_group_size(d);

    let raw_keys: Vec<Vec<GroupKey>> = domains
        .iter()
        .map(|(labels, clusters)| {
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| GroupKey::new(l.clone(), clusters.map(|c| c[i])))
                .collect()
        })
        .collect();

    // Per-key counts per domain.
    let all_keys: BTreeSet<GroupKey> = raw_keys.iter().flatten().cloned().collect();
    let count = |key: &GroupKey, dom: usize| raw_keys[dom].iter().filter(|k| *k == key).count();
    let counts: BTreeMap<&GroupKey, Vec<usize>> = all_keys
        .iter()
        .map(|k| (k, (0..domains.len()).map(|dom| count(k, dom)).collect()))
        .collect();

    let mut remap: BTreeMap<GroupKey, GroupKey> = BTreeMap::new();
    let mut dims: BTreeMap<GroupKey, usize> = BTreeMap::new();
    let labels: BTreeSet<&Label> = all_keys.iter().map(|k| &k.label).collect();
    for label in labels {
        let members: Vec<&GroupKey> = all_keys.iter().filter(|k| &k.label == label).collect();
        let combined = |k: &GroupKey| counts[k].iter().sum::<usize>();
        let smallest = |k: &GroupKey| *counts[k].iter().min().unwrap();
        // Largest by combined size; BTreeSet order makes the lowest cluster win ties.
        let largest_of = |keys: &[&GroupKey]| -> Option<GroupKey> {
            keys.iter()
                .fold(None::<&GroupKey>, |best, k| match best {
                    Some(b) if combined(b) >= combined(k) => Some(b),
                    _ => Some(k),
                })
                .map(|k| (*k).clone())
        };
        let valid: Vec<&GroupKey> = members.iter().copied().filter(|k| smallest(k) >= threshold).collect();
        if let Some(sink) = largest_of(&valid) {
            for k in &members {
                if smallest(k) >= threshold {
                    remap.insert((*k).clone(), (*k).clone());
                    dims.insert((*k).clone(), d);
                } else {
                    remap.insert((*k).clone(), sink.clone());
                }
            }
        } else {
            let sink = largest_of(&members).expect("label has at least one key");
            let class_size = (0..domains.len())
                .map(|dom| members.iter().map(|k| counts[*k][dom]).sum::<usize>())
                .min()
                .unwrap_or(0);
            for k in &members {
                remap.insert((*k).clone(), sink.clone());
            }
            dims.insert(sink, d.min(class_size.saturating_sub(1)).max(1));
        }
    }

    Ok(raw_keys
        .into_iter()
        .map(|keys| {
            let keys: Vec<GroupKey> = keys.iter().map(|k| remap[k].clone()).collect();
            let mut roster: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
            for (i, k) in keys.iter().enumerate() {
                roster.entry(k.clone()).or_default().push(i);
            }
            let dims = roster.keys().map(|k| (k.clone(), dims[k])).collect();
            GroupAssignment { keys, roster, dims }
        })
        .collect())
}
