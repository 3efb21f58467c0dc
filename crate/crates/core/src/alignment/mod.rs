//! One-step alignment of a source domain onto a target domain.
//!
//! [`align_unsupervised`] matches the global principal subspaces of the two
//! domains. [`align_semi_supervised`] pseudo-labels the target from a few
//! seeds, aligns each class (optionally each class x cluster) separately,
//! re-centres every transformed source group on its target group, and finally
//! expresses both domains in the target's global PCA frame.

mod groups;
mod kmeans;
mod pseudo;

use std::collections::{BTreeSet, HashMap, HashSet};

use nalgebra::{DMatrix, RowDVector};
use rayon::prelude::*;

pub use groups::{make_groups, make_matched_groups, min_group_size, GroupAssignment, GroupKey};
pub use kmeans::{kmeans, shared_clusters, KMeansFit, DEFAULT_CLUSTERS, MAX_ITERATIONS};
pub use pseudo::{pseudo_label, pseudo_label_rounds};

use crate::error::{Result, SsaError};
use crate::linalg::{fit_pca, max_dim, row_mean, solve_alignment, AlignmentTransform, SampleMatrix, SubspaceBasis};
use crate::{Label, SampleId};

/// One time-step's samples with whatever annotation is available.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainData {
    pub x: SampleMatrix,
    /// Per-row label; `None` for unlabeled rows.
    pub labels: Vec<Option<Label>>,
    pub cluster_ids: Option<Vec<usize>>,
    pub sample_ids: Vec<SampleId>,
}

impl DomainData {
    /// Unlabeled domain.
    pub fn new(x: SampleMatrix, sample_ids: Vec<SampleId>) -> Result<Self> {
        let n = x.nrows();
        Self::from_parts(x, vec![None; n], None, sample_ids)
    }

    pub fn from_parts(
        x: SampleMatrix,
        labels: Vec<Option<Label>>,
        cluster_ids: Option<Vec<usize>>,
        sample_ids: Vec<SampleId>,
    ) -> Result<Self> {
        let n = x.nrows();
        for len in [labels.len(), sample_ids.len()]
            .into_iter()
            .chain(cluster_ids.as_ref().map(Vec::len))
        {
            if len != n {
                return Err(SsaError::LengthMismatch { left: n, right: len });
            }
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &sample_ids {
            if !seen.insert(id) {
                return Err(SsaError::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            x,
            labels,
            cluster_ids,
            sample_ids,
        })
    }

    pub fn with_labels(mut self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(SsaError::LengthMismatch {
                left: self.len(),
                right: labels.len(),
            });
        }
        self.labels = labels.into_iter().map(Some).collect();
        Ok(self)
    }

    pub fn with_clusters(mut self, ids: Vec<usize>) -> Result<Self> {
        if ids.len() != self.len() {
            return Err(SsaError::LengthMismatch {
                left: self.len(),
                right: ids.len(),
            });
        }
        self.cluster_ids = Some(ids);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// All labels, or `None` if any row is unlabeled.
    pub fn full_labels(&self) -> Option<Vec<Label>> {
        self.labels.iter().cloned().collect()
    }
}

/// Annotated target samples: `(sample_id, label)`, in priority order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeedSet {
    pub entries: Vec<(SampleId, Label)>,
}

impl SeedSet {
    pub fn new(entries: Vec<(SampleId, Label)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (id, _) in &entries {
            if !seen.insert(id) {
                return Err(SsaError::InvalidConfig(format!("seed `{id}` listed twice")));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> BTreeSet<&Label> {
        self.entries.iter().map(|(_, l)| l).collect()
    }

    /// Row index in `target` of every entry.
    pub fn resolve(&self, target: &DomainData) -> Result<Vec<usize>> {
        let index: HashMap<&str, usize> = target
            .sample_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        self.entries
            .iter()
            .map(|(id, _)| index.get(id.as_str()).copied().ok_or_else(|| SsaError::UnknownSeedId(id.clone())))
            .collect()
    }
}

/// How one alignment group was mapped.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTransform {
    /// `None` for a whole-domain (unsupervised) alignment.
    pub key: Option<GroupKey>,
    pub source_rows: Vec<usize>,
    pub target_rows: Vec<usize>,
    /// `None` when the group is too small for PCA; its source rows are then
    /// mapped onto the target group mean.
    pub source_basis: Option<SubspaceBasis>,
    pub target_basis: Option<SubspaceBasis>,
    pub transform: Option<AlignmentTransform>,
    pub source_mean: RowDVector<f64>,
    pub target_mean: RowDVector<f64>,
}

/// Source and target samples expressed in one shared `d`-dimensional frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub source_coords: DMatrix<f64>,
    pub target_coords: DMatrix<f64>,
    pub source_labels: Vec<Option<Label>>,
    /// Given labels (unsupervised) or seed/pseudo labels (semi-supervised).
    pub target_labels: Vec<Option<Label>>,
    pub target_is_seed: Vec<bool>,
    /// The target's global basis; both coordinate blocks live in its frame.
    pub basis: SubspaceBasis,
    pub groups: Vec<GroupTransform>,
}

impl AlignedPair {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

fn check_compatible(source: &DomainData, target: &DomainData, d: usize) -> Result<()> {
    if source.dim() != target.dim() {
        return Err(SsaError::DimensionMismatch {
            expected: source.dim(),
            got: target.dim(),
        });
    }
    for n in [source.len(), target.len()] {
        if n < 2 {
            return Err(SsaError::DegenerateInput(format!("domain has {n} rows")));
        }
    }
    if d == 0 {
        return Err(SsaError::InvalidConfig("subspace dimension must be >= 1".into()));
    }
    let max = max_dim(source.len(), source.dim()).min(max_dim(target.len(), target.dim()));
    if d > max {
        return Err(SsaError::DimensionTooLarge { requested: d, max });
    }
    Ok(())
}

/// Largest `d` both domains support; logs when the request is clamped.
pub fn effective_dim(requested: usize, source: &DomainData, target: &DomainData) -> usize {
    let max = max_dim(source.len(), source.dim()).min(max_dim(target.len(), target.dim()));
    if requested > max {
        log::warn!("subspace dimension {requested} clamped to {max}");
    }
    requested.min(max)
}

/// Global subspace alignment: source rows go to `(x - mu_s) C_s M*`, target
/// rows to `(x - mu_t) C_t`, with `M* = C_s^T C_t`.
pub fn align_unsupervised(source: &DomainData, target: &DomainData, d: usize) -> Result<AlignedPair> {
    check_compatible(source, target, d)?;
    let c_s = fit_pca(source.x.as_matrix(), d)?;
    let c_t = fit_pca(target.x.as_matrix(), d)?;
    let transform = solve_alignment(&c_s, &c_t)?;
    let source_coords = c_s.project(source.x.as_matrix())? * &transform.m;
    let target_coords = c_t.project(target.x.as_matrix())?;
    let group = GroupTransform {
        key: None,
        source_rows: (0..source.len()).collect(),
        target_rows: (0..target.len()).collect(),
        source_mean: c_s.mean.clone(),
        target_mean: c_t.mean.clone(),
        source_basis: Some(c_s),
        target_basis: Some(c_t.clone()),
        transform: Some(transform),
    };
    Ok(AlignedPair {
        source_coords,
        target_coords,
        source_labels: source.labels.clone(),
        target_labels: target.labels.clone(),
        target_is_seed: vec![false; target.len()],
        basis: c_t,
        groups: vec![group],
    })
}

/// Options for [`align_semi_supervised_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SemiSupervisedConfig {
    pub d: usize,
    /// Refine classes by shared k-means cluster ids.
    pub use_clusters: bool,
    pub clusters: usize,
    pub rng_seed: u64,
    /// Pseudo-labeling passes; 1 is a single nearest-seed pass.
    pub pseudo_label_rounds: usize,
}

impl SemiSupervisedConfig {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            use_clusters: false,
            clusters: DEFAULT_CLUSTERS,
            rng_seed: 0,
            pseudo_label_rounds: 1,
        }
    }
}

pub fn align_semi_supervised(
    source: &DomainData,
    target: &DomainData,
    seeds: &SeedSet,
    d: usize,
    use_clusters: bool,
    rng_seed: u64,
) -> Result<AlignedPair> {
    let config = SemiSupervisedConfig {
        use_clusters,
        rng_seed,
        ..SemiSupervisedConfig::new(d)
    };
    align_semi_supervised_with(source, target, seeds, &config)
}

/// Per-group alignment with class centering. Each source row `x` of group `g`
/// is mapped to `(x - mu_sg) C_sg M_g C_tg^T + mu_tg`; then every mapped source
/// row and every target row is projected onto the target's global basis.
pub fn align_semi_supervised_with(
    source: &DomainData,
    target: &DomainData,
    seeds: &SeedSet,
    config: &SemiSupervisedConfig,
) -> Result<AlignedPair> {
    let d = config.d;
    check_compatible(source, target, d)?;
    let source_labels = source
        .full_labels()
        .ok_or_else(|| SsaError::DegenerateInput("source domain must be fully labeled".into()))?;
    let seed_labels = seeds.labels();
    for label in source_labels.iter().collect::<BTreeSet<_>>() {
        if !seed_labels.contains(label) {
            return Err(SsaError::MissingSeedClass(label.clone()));
        }
    }

    let target_labels = pseudo_label_rounds(target, seeds, config.pseudo_label_rounds)?;
    let mut target_is_seed = vec![false; target.len()];
    for row in seeds.resolve(target)? {
        target_is_seed[row] = true;
    }

    let clusters = if config.use_clusters {
        match (&source.cluster_ids, &target.cluster_ids) {
            (Some(s), Some(t)) => Some((s.clone(), t.clone())),
            _ => Some(shared_clusters(source, target, config.clusters, config.rng_seed)?),
        }
    } else {
        None
    };
    let (src_clusters, tgt_clusters) = match &clusters {
        Some((s, t)) => (Some(s.as_slice()), Some(t.as_slice())),
        None => (None, None),
    };
    let mut grouped = make_matched_groups(&[(&source_labels, src_clusters), (&target_labels, tgt_clusters)], d)?;
    let tgt_groups = grouped.pop().expect("two domains");
    let src_groups = grouped.pop().expect("two domains");

    let xs = source.x.as_matrix();
    let xt = target.x.as_matrix();
    let jobs: Vec<(&GroupKey, &Vec<usize>)> = src_groups.roster.iter().collect();
    let mapped: Vec<(GroupTransform, DMatrix<f64>)> = jobs
        .par_iter()
        .map(|(key, src_rows)| {
            let tgt_rows = tgt_groups
                .roster
                .get(*key)
                .ok_or_else(|| SsaError::MissingSeedClass(key.label.clone()))?;
            align_group(key, src_rows, tgt_rows, src_groups.dims[*key], xs, xt)
        })
        .collect::<Result<_>>()?;

    let mut source_ambient = DMatrix::zeros(xs.nrows(), xs.ncols());
    let mut transforms = Vec::with_capacity(mapped.len());
    for (group, rows) in mapped {
        for (k, &r) in group.source_rows.iter().enumerate() {
            source_ambient.set_row(r, &rows.row(k));
        }
        transforms.push(group);
    }

    let basis = fit_pca(xt, d)?;
    Ok(AlignedPair {
        source_coords: basis.project(&source_ambient)?,
        target_coords: basis.project(xt)?,
        source_labels: source.labels.clone(),
        target_labels: target_labels.into_iter().map(Some).collect(),
        target_is_seed,
        basis,
        groups: transforms,
    })
}

/// Aligns one group and returns its transform plus the mapped source rows
/// (in ambient coordinates, ordered as `src_rows`).
fn align_group(
    key: &GroupKey,
    src_rows: &[usize],
    tgt_rows: &[usize],
    dim: usize,
    xs: &DMatrix<f64>,
    xt: &DMatrix<f64>,
) -> Result<(GroupTransform, DMatrix<f64>)> {
    let s = xs.select_rows(src_rows);
    let t = xt.select_rows(tgt_rows);
    let source_mean = row_mean(&s);
    let target_mean = row_mean(&t);
    let d = dim.min(max_dim(s.nrows(), s.ncols())).min(max_dim(t.nrows(), t.ncols()));

    let (mapped, source_basis, target_basis, transform) = if d == 0 {
        // Too few rows on one side for any component: collapse onto the target mean.
        let mut m = DMatrix::zeros(s.nrows(), s.ncols());
        for mut row in m.row_iter_mut() {
            row.copy_from(&target_mean);
        }
        (m, None, None, None)
    } else {
        let c_s = fit_pca(&s, d)?;
        let c_t = fit_pca(&t, d)?;
        let transform = solve_alignment(&c_s, &c_t)?;
        let coords = c_s.project(&s)? * &transform.m;
        let mut m = coords * c_t.components.transpose();
        for mut row in m.row_iter_mut() {
            row += &target_mean;
        }
        (m, Some(c_s), Some(c_t), Some(transform))
    };
    Ok((
        GroupTransform {
            key: Some(key.clone()),
            source_rows: src_rows.to_vec(),
            target_rows: tgt_rows.to_vec(),
            source_basis,
            target_basis,
            transform,
            source_mean,
            target_mean,
        },
        mapped,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain(rows: &[Vec<f64>], prefix: &str) -> DomainData {
        let ids = (0..rows.len()).map(|i| format!("{prefix}{i}")).collect();
        DomainData::new(SampleMatrix::from_rows(rows).unwrap(), ids).unwrap()
    }

    #[test]
    fn domain_validation() {
        let x = SampleMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(
            DomainData::new(x.clone(), vec!["a".into(), "a".into()]),
            Err(SsaError::DuplicateId(_))
        ));
        assert!(DomainData::new(x.clone(), vec!["a".into()]).is_err());
        let d = DomainData::new(x, vec!["a".into(), "b".into()]).unwrap();
        assert!(d.clone().with_labels(vec!["A".into()]).is_err());
        assert!(d.with_clusters(vec![0, 1]).is_ok());
    }

    #[test]
    fn identical_domains_align_to_identity() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i * i % 7) as f64, (i % 3) as f64]).collect();
        let s = domain(&rows, "s");
        let pair = align_unsupervised(&s, &s, 2).unwrap();
        let m = &pair.groups[0].transform.as_ref().unwrap().m;
        assert!((m - DMatrix::<f64>::identity(2, 2)).amax() < 1e-8);
        assert!((&pair.source_coords - &pair.target_coords).amax() < 1e-8);
    }

    #[test]
    fn dimension_errors() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 1.0 - i as f64, (i % 2) as f64]).collect();
        let s = domain(&rows, "s");
        assert!(matches!(align_unsupervised(&s, &s, 4), Err(SsaError::DimensionTooLarge { max: 3, .. })));
        let one = domain(&[vec![1.0, 2.0, 3.0]], "o");
        assert!(matches!(align_unsupervised(&one, &s, 1), Err(SsaError::DegenerateInput(_))));
    }

    #[test]
    fn missing_seed_class_is_rejected() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 0.5 * i as f64]).collect();
        let s = domain(&rows, "s").with_labels(vec!["A".into(), "A".into(), "A".into(), "B".into(), "B".into(), "B".into()]).unwrap();
        let t = domain(&rows, "t");
        let seeds = SeedSet::new(vec![("t0".into(), "A".into())]).unwrap();
        assert!(matches!(
            align_semi_supervised(&s, &t, &seeds, 1, false, 0),
            Err(SsaError::MissingSeedClass(l)) if l == "B"
        ));
    }

    #[test]
    fn seeds_keep_labels_and_flags() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![(i / 4) as f64 * 10.0 + (i % 4) as f64, (i % 3) as f64]).collect();
        let labels: Vec<Label> = (0..8).map(|i| if i < 4 { "A".into() } else { "B".into() }).collect();
        let s = domain(&rows, "s").with_labels(labels).unwrap();
        let t = domain(&rows, "t");
        let seeds = SeedSet::new(vec![("t5".into(), "A".into()), ("t1".into(), "B".into())]).unwrap();
        let pair = align_semi_supervised(&s, &t, &seeds, 1, false, 0).unwrap();
        assert_eq!(pair.target_labels[5].as_deref(), Some("A"));
        assert_eq!(pair.target_labels[1].as_deref(), Some("B"));
        assert!(pair.target_is_seed[5] && pair.target_is_seed[1]);
        assert_eq!(pair.target_is_seed.iter().filter(|&&b| b).count(), 2);
        assert_eq!(pair.source_coords.ncols(), pair.target_coords.ncols());
    }
}
