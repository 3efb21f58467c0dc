//! Unbounded-time extension: any number of time-steps is reduced to a single
//! joint space by joining overlapping adjacent spaces level by level.
//!
//! With steps `1..=n`, level 1 holds the pairwise joins `(1,2), (2,3), ...`,
//! level 2 joins adjacent level-1 spaces, and so on until a single root covers
//! every step. In each join the later space is the target frame, and rows
//! present in both inputs keep the later copy.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::alignment::{
    align_semi_supervised_with, align_unsupervised, kmeans, shared_clusters, DomainData, SeedSet,
    SemiSupervisedConfig, DEFAULT_CLUSTERS,
};
use crate::error::{Result, SsaError};
use crate::linalg::{max_dim, SampleMatrix};
use crate::{Label, SampleId};

/// Samples of one or more contiguous steps in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpace {
    pub level: usize,
    /// Ascending step indices.
    pub covered_steps: Vec<u32>,
    /// Ambient rows at level 0, `d` columns above.
    pub coords: DMatrix<f64>,
    pub labels: Vec<Option<Label>>,
    pub cluster_ids: Option<Vec<usize>>,
    pub sample_ids: Vec<SampleId>,
    /// Rows whose label is a true annotation.
    pub is_seed: Vec<bool>,
    /// Step each row came from.
    pub origin_steps: Vec<u32>,
}

impl JointSpace {
    /// A single step at level 0. Rows with `is_seed` must carry a label.
    pub fn leaf(
        step: u32,
        x: SampleMatrix,
        labels: Vec<Option<Label>>,
        sample_ids: Vec<SampleId>,
        is_seed: Vec<bool>,
    ) -> Result<Self> {
        let n = x.nrows();
        for len in [labels.len(), sample_ids.len(), is_seed.len()] {
            if len != n {
                return Err(SsaError::LengthMismatch { left: n, right: len });
            }
        }
        if let Some(i) = (0..n).find(|&i| is_seed[i] && labels[i].is_none()) {
            return Err(SsaError::InvalidConfig(format!(
                "seed row `{}` has no label",
                sample_ids[i]
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &sample_ids {
            if !seen.insert(id) {
                return Err(SsaError::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            level: 0,
            covered_steps: vec![step],
            coords: x.into_inner(),
            labels,
            cluster_ids: None,
            sample_ids,
            is_seed,
            origin_steps: vec![step; n],
        })
    }

    /// A fully annotated step: every row labeled and flagged as a seed.
    pub fn labeled_leaf(step: u32, x: SampleMatrix, labels: Vec<Label>, sample_ids: Vec<SampleId>) -> Result<Self> {
        let n = labels.len();
        Self::leaf(step, x, labels.into_iter().map(Some).collect(), sample_ids, vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    fn seeds(&self) -> SeedSet {
        SeedSet {
            entries: (0..self.len())
                .filter(|&i| self.is_seed[i])
                .map(|i| (self.sample_ids[i].clone(), self.labels[i].clone().expect("seed rows are labeled")))
                .collect(),
        }
    }

    fn domain(&self, labels: Vec<Option<Label>>) -> Result<DomainData> {
        DomainData::from_parts(
            SampleMatrix::new(self.coords.clone())?,
            labels,
            self.cluster_ids.clone(),
            self.sample_ids.clone(),
        )
    }
}

/// Which alignment a join performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinKind {
    Unsupervised,
    SemiSupervised { use_clusters: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub d: usize,
    pub kind: JoinKind,
    pub clusters: usize,
    pub rng_seed: u64,
}

impl TreeConfig {
    pub fn new(d: usize, kind: JoinKind) -> Self {
        Self {
            d,
            kind,
            clusters: DEFAULT_CLUSTERS,
            rng_seed: 0,
        }
    }
}

/// Every level of the join tree; the last level holds the root alone.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentTree {
    pub levels: Vec<Vec<JointSpace>>,
}

impl AlignmentTree {
    pub fn root(&self) -> &JointSpace {
        &self.levels.last().expect("tree has levels")[0]
    }

    pub fn into_root(mut self) -> JointSpace {
        self.levels.pop().expect("tree has levels").swap_remove(0)
    }
}

/// Semi-supervised join of two spaces, `left` as source and `right` as target.
pub fn join_pair(left: &JointSpace, right: &JointSpace, d: usize, use_clusters: bool, rng_seed: u64) -> Result<JointSpace> {
    let config = TreeConfig {
        rng_seed,
        ..TreeConfig::new(d, JoinKind::SemiSupervised { use_clusters })
    };
    join_with(left, right, &config)
}

pub fn join_with(left: &JointSpace, right: &JointSpace, config: &TreeConfig) -> Result<JointSpace> {
    if left.dim() != right.dim() {
        return Err(SsaError::FrameMismatch {
            left: left.dim(),
            right: right.dim(),
        });
    }
    let d = config.d;
    let (pair, left_clusters, right_clusters) = match config.kind {
        JoinKind::Unsupervised => {
            let source = left.domain(left.labels.clone())?;
            let target = right.domain(right.labels.clone())?;
            let pair = align_unsupervised(&source, &target, d)?;
            (pair, left.cluster_ids.clone(), right.cluster_ids.clone())
        }
        JoinKind::SemiSupervised { use_clusters } => {
            let mut source = left.domain(left.labels.clone())?;
            let mut target = right.domain(vec![None; right.len()])?;
            if use_clusters && (source.cluster_ids.is_none() || target.cluster_ids.is_none()) {
                let (s, t) = shared_clusters(&source, &target, config.clusters, config.rng_seed)?;
                source.cluster_ids = Some(s);
                target.cluster_ids = Some(t);
            }
            let semi = SemiSupervisedConfig {
                d,
                use_clusters,
                clusters: config.clusters,
                rng_seed: config.rng_seed,
                pseudo_label_rounds: 1,
            };
            let pair = align_semi_supervised_with(&source, &target, &right.seeds(), &semi)?;
            (pair, source.cluster_ids, target.cluster_ids)
        }
    };

    let right_ids: HashSet<&SampleId> = right.sample_ids.iter().collect();
    let keep_left: Vec<usize> = (0..left.len()).filter(|&i| !right_ids.contains(&left.sample_ids[i])).collect();
    let n = keep_left.len() + right.len();
    let mut coords = DMatrix::zeros(n, pair.dim());
    for (out, &i) in keep_left.iter().enumerate() {
        coords.set_row(out, &pair.source_coords.row(i));
    }
    for i in 0..right.len() {
        coords.set_row(keep_left.len() + i, &pair.target_coords.row(i));
    }

    let mut labels: Vec<Option<Label>> = keep_left.iter().map(|&i| left.labels[i].clone()).collect();
    labels.extend(pair.target_labels.iter().cloned());
    let mut sample_ids: Vec<SampleId> = keep_left.iter().map(|&i| left.sample_ids[i].clone()).collect();
    sample_ids.extend(right.sample_ids.iter().cloned());
    let mut is_seed: Vec<bool> = keep_left.iter().map(|&i| left.is_seed[i]).collect();
    is_seed.extend(right.is_seed.iter().copied());
    let mut origin_steps: Vec<u32> = keep_left.iter().map(|&i| left.origin_steps[i]).collect();
    origin_steps.extend(right.origin_steps.iter().copied());
    let cluster_ids = match (left_clusters, right_clusters) {
        (Some(l), Some(r)) => {
            let mut ids: Vec<usize> = keep_left.iter().map(|&i| l[i]).collect();
            ids.extend(r);
            Some(ids)
        }
        _ => None,
    };
    let mut covered_steps: Vec<u32> = left.covered_steps.iter().chain(&right.covered_steps).copied().collect();
    covered_steps.sort_unstable();
    covered_steps.dedup();

    Ok(JointSpace {
        level: left.level.max(right.level) + 1,
        covered_steps,
        coords,
        labels,
        cluster_ids,
        sample_ids,
        is_seed,
        origin_steps,
    })
}

/// Largest `d` every step supports; logs when the request is clamped.
pub fn effective_tree_dim(requested: usize, steps: &[JointSpace]) -> usize {
    let max = steps.iter().map(|s| max_dim(s.len(), s.dim())).min().unwrap_or(0);
    if requested > max {
        log::warn!("subspace dimension {requested} clamped to {max} for the alignment tree");
    }
    requested.min(max)
}

/// Builds the full join tree over `steps` (chronological, level 0).
///
/// With clustering enabled and no cluster ids on the inputs, k-means runs
/// once over the union of all steps so ids agree everywhere in the tree.
pub fn build_tree(steps: Vec<JointSpace>, config: &TreeConfig) -> Result<AlignmentTree> {
    if steps.len() < 2 {
        return Err(SsaError::TooFewSteps(steps.len()));
    }
    let dim = steps[0].dim();
    if let Some(bad) = steps.iter().find(|s| s.dim() != dim) {
        return Err(SsaError::FrameMismatch {
            left: dim,
            right: bad.dim(),
        });
    }
    let d = effective_tree_dim(config.d, &steps);
    if d == 0 {
        return Err(SsaError::DegenerateInput("a step has fewer than 2 rows".into()));
    }
    let config = TreeConfig { d, ..config.clone() };

    let mut steps = steps;
    if matches!(config.kind, JoinKind::SemiSupervised { use_clusters: true }) && steps.iter().any(|s| s.cluster_ids.is_none()) {
        assign_shared_clusters(&mut steps, config.clusters, config.rng_seed)?;
    }

    let mut levels = vec![steps];
    while levels.last().expect("non-empty").len() > 1 {
        let current = levels.last().expect("non-empty");
        let next: Vec<JointSpace> = (0..current.len() - 1)
            .into_par_iter()
            .map(|i| join_with(&current[i], &current[i + 1], &config))
            .collect::<Result<_>>()?;
        levels.push(next);
    }
    Ok(AlignmentTree { levels })
}

fn assign_shared_clusters(steps: &mut [JointSpace], k: usize, rng_seed: u64) -> Result<()> {
    let total: usize = steps.iter().map(JointSpace::len).sum();
    let dim = steps[0].dim();
    let mut union = DMatrix::zeros(total, dim);
    let mut row = 0;
    for s in steps.iter() {
        for r in s.coords.row_iter() {
            union.set_row(row, &r);
            row += 1;
        }
    }
    let ids = kmeans(&union, k, rng_seed)?.assignments;
    let mut offset = 0;
    for s in steps.iter_mut() {
        s.cluster_ids = Some(ids[offset..offset + s.len()].to_vec());
        offset += s.len();
    }
    Ok(())
}
