//! Per-step evaluation protocol: for every test step after the first, train
//! under each mode column, score on the step's test split, and collect a
//! report. Also the seeds-per-class sweep.

mod metrics;
mod report;
mod sweep;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

pub use metrics::{metrics, Metrics};
pub use report::{Average, Metric, Provenance, Report, ReportRow, REPORT_COLUMNS};
pub use sweep::{render_sweep, sweep_seeds, SweepPoint, DEFAULT_REPETITIONS};

use crate::alignment::{SeedSet, DEFAULT_CLUSTERS};
use crate::classify::{oversample, ClassifierSpec, LabeledSet, SvmSettings};
use crate::data::{Corpus, Split};
use crate::error::{Result, SsaError};
use crate::rng::{derive_seed, rng_from_seed};
use crate::temporal::{build_tree, JoinKind, JointSpace, TreeConfig};
use crate::{Label, SampleId};

/// The training regimes compared per test step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Labeled train rows of other steps plus the seeds.
    All,
    /// The test step's own train split.
    Same,
    /// The previous step's train split, unaligned.
    Prev,
    /// Previous step aligned to the test step without labels.
    Unsup,
    /// Previous step aligned per class using seeds; seeds join training.
    Semi,
    /// Every preceding step, unsupervised tree.
    UnsupUnb,
    /// Every preceding step, semi-supervised tree.
    SemiUnb,
    /// Semi-supervised tree with cluster-augmented groups.
    SemiUnbClst,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::All,
        Mode::Same,
        Mode::Prev,
        Mode::Unsup,
        Mode::Semi,
        Mode::UnsupUnb,
        Mode::SemiUnb,
        Mode::SemiUnbClst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::All => "all",
            Mode::Same => "same",
            Mode::Prev => "prev",
            Mode::Unsup => "unsup",
            Mode::Semi => "semi",
            Mode::UnsupUnb => "unsup_unb",
            Mode::SemiUnb => "semi_unb",
            Mode::SemiUnbClst => "semi_unb_clst",
        }
    }

    /// Modes that draw labeled seeds from the test step.
    pub fn uses_seeds(self) -> bool {
        matches!(self, Mode::All | Mode::Semi | Mode::SemiUnb | Mode::SemiUnbClst)
    }

    pub fn needs_history(self) -> bool {
        !matches!(self, Mode::All | Mode::Same)
    }

    fn join_kind(self) -> Option<JoinKind> {
        match self {
            Mode::Unsup | Mode::UnsupUnb => Some(JoinKind::Unsupervised),
            Mode::Semi | Mode::SemiUnb => Some(JoinKind::SemiSupervised { use_clusters: false }),
            Mode::SemiUnbClst => Some(JoinKind::SemiSupervised { use_clusters: true }),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = SsaError;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| SsaError::InvalidConfig(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// Subspace dimension; clamped per alignment to what the data supports.
    pub d: usize,
    pub seeds_per_class: usize,
    pub classifier: ClassifierSpec,
    pub modes: Vec<Mode>,
    pub rng_seed: u64,
    pub clusters: usize,
    pub oversample: bool,
    /// Let the `all` mode train on steps after the test step too.
    pub all_includes_future: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d: 100,
            seeds_per_class: 10,
            classifier: ClassifierSpec::Svm(SvmSettings::default()),
            modes: Mode::ALL.to_vec(),
            rng_seed: 0,
            clusters: DEFAULT_CLUSTERS,
            oversample: false,
            all_includes_future: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(SsaError::InvalidConfig("subspace dimension must be >= 1".into()));
        }
        if self.modes.is_empty() {
            return Err(SsaError::InvalidConfig("no modes requested".into()));
        }
        if self.seeds_per_class == 0 && self.modes.iter().any(|m| m.uses_seeds() && *m != Mode::All) {
            return Err(SsaError::InvalidConfig("semi-supervised modes need at least one seed per class".into()));
        }
        if self.clusters == 0 {
            return Err(SsaError::InvalidConfig("cluster count must be >= 1".into()));
        }
        if let ClassifierSpec::Knn { k: 0 } = self.classifier {
            return Err(SsaError::InvalidConfig("k must be >= 1".into()));
        }
        Ok(())
    }

    /// Requested modes, deduplicated, in column order.
    pub fn ordered_modes(&self) -> Vec<Mode> {
        self.modes.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }
}

/// One (test step, mode) result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub test_step: u32,
    pub mode: Mode,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub train_size: usize,
    pub eval_size: usize,
    /// Subspace dimension actually used by aligned modes.
    pub subspace_dim: Option<usize>,
    #[serde(skip)]
    pub train_ids: Vec<SampleId>,
    #[serde(skip)]
    pub eval_ids: Vec<SampleId>,
}

/// Seeded uniform choice of `min(m, class size)` labeled train rows per class
/// of `step`. Every class occurring anywhere in the step must have one.
pub fn select_seeds(corpus: &Corpus, step: u32, m: usize, rng_seed: u64) -> Result<SeedSet> {
    let classes: BTreeSet<&Label> = corpus
        .records
        .iter()
        .filter(|r| r.step == step)
        .filter_map(|r| r.label.as_ref())
        .collect();
    let mut rng = rng_from_seed(derive_seed(rng_seed, &["seeds", &step.to_string()]));
    let mut entries = Vec::new();
    for class in classes {
        let pool: Vec<usize> = corpus
            .select(step, Some(Split::Train))
            .into_iter()
            .filter(|&i| corpus.records[i].label.as_ref() == Some(class))
            .collect();
        if pool.is_empty() {
            return Err(SsaError::MissingClass(class.clone()));
        }
        let mut chosen = index::sample(&mut rng, pool.len(), m.min(pool.len())).into_vec();
        chosen.sort_unstable();
        entries.extend(chosen.into_iter().map(|k| (corpus.records[pool[k]].id.clone(), class.clone())));
    }
    SeedSet::new(entries)
}

fn labeled_train_rows(corpus: &Corpus, step: u32) -> Vec<usize> {
    corpus
        .select(step, Some(Split::Train))
        .into_iter()
        .filter(|&i| corpus.records[i].label.is_some())
        .collect()
}

fn labels_of(corpus: &Corpus, rows: &[usize]) -> Vec<Label> {
    rows.iter().map(|&i| corpus.records[i].label.clone().expect("labeled row")).collect()
}

fn ids_of(corpus: &Corpus, rows: &[usize]) -> Vec<SampleId> {
    rows.iter().map(|&i| corpus.records[i].id.clone()).collect()
}

/// Trains under `mode` and scores on the test split of `test_step`.
pub fn run_mode(corpus: &Corpus, test_step: u32, mode: Mode, config: &RunConfig) -> Result<Cell> {
    config.validate()?;
    let steps = corpus.steps();
    let pos = steps
        .iter()
        .position(|&s| s == test_step)
        .ok_or_else(|| SsaError::InvalidConfig(format!("test step {test_step} is not in the manifest")))?;
    let history = &steps[..pos];
    if mode.needs_history() && history.is_empty() {
        return Err(SsaError::NoHistory(test_step));
    }

    let seeds = if mode.uses_seeds() {
        select_seeds(corpus, test_step, config.seeds_per_class, config.rng_seed)?
    } else {
        SeedSet::default()
    };
    let seed_labels: HashMap<&str, &Label> = seeds.entries.iter().map(|(id, l)| (id.as_str(), l)).collect();

    let eval_rows: Vec<usize> = corpus
        .select(test_step, Some(Split::Test))
        .into_iter()
        .filter(|&i| corpus.records[i].label.is_some() && !seed_labels.contains_key(corpus.records[i].id.as_str()))
        .collect();
    if eval_rows.is_empty() {
        return Err(SsaError::EmptyInput(format!("no labeled test rows at step {test_step}")));
    }
    let truth = labels_of(corpus, &eval_rows);
    let eval_ids = ids_of(corpus, &eval_rows);
    let cell_seed = derive_seed(config.rng_seed, &["cell", &test_step.to_string()]);

    let (train, train_ids, eval_coords, subspace_dim) = match mode.join_kind() {
        None => {
            let mut rows: Vec<usize> = match mode {
                Mode::All => steps
                    .iter()
                    .filter(|&&s| s < test_step || (config.all_includes_future && s > test_step))
                    .flat_map(|&s| labeled_train_rows(corpus, s))
                    .collect(),
                Mode::Same => labeled_train_rows(corpus, test_step),
                _ => labeled_train_rows(corpus, *history.last().expect("history checked")),
            };
            if mode == Mode::All {
                rows.extend(
                    corpus
                        .select(test_step, Some(Split::Train))
                        .into_iter()
                        .filter(|&i| seed_labels.contains_key(corpus.records[i].id.as_str())),
                );
            }
            let train = LabeledSet::new(corpus.matrix(&rows)?.into_inner(), labels_of(corpus, &rows))?;
            (train, ids_of(corpus, &rows), corpus.matrix(&eval_rows)?.into_inner(), None)
        }
        Some(kind) => {
            let history_steps = match mode {
                Mode::Unsup | Mode::Semi => &history[history.len() - 1..],
                _ => history,
            };
            let mut leaves = Vec::with_capacity(history_steps.len() + 1);
            for &s in history_steps {
                let rows = labeled_train_rows(corpus, s);
                leaves.push(JointSpace::labeled_leaf(s, corpus.matrix(&rows)?, labels_of(corpus, &rows), ids_of(corpus, &rows))?);
            }
            let rows = corpus.select(test_step, None);
            let labels: Vec<Option<Label>> = rows
                .iter()
                .map(|&i| seed_labels.get(corpus.records[i].id.as_str()).map(|l| (*l).clone()))
                .collect();
            let is_seed = labels.iter().map(Option::is_some).collect();
            leaves.push(JointSpace::leaf(test_step, corpus.matrix(&rows)?, labels, ids_of(corpus, &rows), is_seed)?);

            let tree_config = TreeConfig {
                d: config.d,
                kind,
                clusters: config.clusters,
                rng_seed: derive_seed(config.rng_seed, &["clusters", &test_step.to_string()]),
            };
            let root = build_tree(leaves, &tree_config)?.into_root();
            let train_rows: Vec<usize> = (0..root.len()).filter(|&i| root.is_seed[i]).collect();
            let position: HashMap<&str, usize> =
                root.sample_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
            let eval_at: Vec<usize> = eval_ids.iter().map(|id| position[id.as_str()]).collect();
            let train = LabeledSet::new(
                root.coords.select_rows(&train_rows),
                train_rows.iter().map(|&i| root.labels[i].clone().expect("seed rows are labeled")).collect(),
            )?;
            let ids = train_rows.iter().map(|&i| root.sample_ids[i].clone()).collect();
            (train, ids, root.coords.select_rows(&eval_at), Some(root.dim()))
        }
    };

    let fit_set = if config.oversample {
        oversample(&train, derive_seed(cell_seed, &["oversample"]))?
    } else {
        train
    };
    let model = config.classifier.fit(&fit_set, cell_seed)?;
    let predictions = model.predict(&eval_coords)?;
    Ok(Cell {
        test_step,
        mode,
        metrics: metrics(&predictions, &truth)?,
        train_size: fit_set.len(),
        eval_size: eval_rows.len(),
        subspace_dim,
        train_ids,
        eval_ids,
    })
}

/// Every requested mode on every step after the first. Cells run on the
/// current rayon pool; results do not depend on scheduling.
pub fn run_protocol(corpus: &Corpus, config: &RunConfig) -> Result<Report> {
    config.validate()?;
    let steps = corpus.steps();
    if steps.len() < 2 {
        return Err(SsaError::TooFewSteps(steps.len()));
    }
    let modes = config.ordered_modes();
    let jobs: Vec<(u32, Mode)> = steps[1..].iter().flat_map(|&s| modes.iter().map(move |&m| (s, m))).collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(step, mode)| run_mode(corpus, step, mode, config))
        .collect::<Result<_>>()?;
    Ok(Report::new(corpus, config, cells))
}
