//! The `ssa` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::classify::{ClassifierSpec, MlpSettings, SvmSettings};
use crate::data::{
    generate_synthetic, read_corpus, render_data, render_manifest, split_corpus, Corpus, Preset, Split, SynthConfig,
    DEFAULT_FRACTIONS,
};
use crate::error::{ErrorKind, Result, SsaError};
use crate::eval::{render_sweep, run_protocol, select_seeds, sweep_seeds, Metric, Mode, RunConfig, DEFAULT_REPETITIONS};
use crate::temporal::{effective_tree_dim, join_with, JoinKind, JointSpace, TreeConfig};

const DEFAULT_DIM: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "ssa", version, about = "Sequential subspace alignment for drifting embedding corpora")]
pub struct Cli {
    /// Worker threads for evaluation cells (default: available processors).
    #[arg(long, global = true, env = "SSA_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic drifting corpus (already split 80/10/10).
    Synth(SynthArgs),
    /// Re-split a corpus 80/10/10 per step and class.
    Split(SplitArgs),
    /// Align one step onto another and write the aligned coordinates.
    Align(AlignArgs),
    /// Run the per-step protocol and write the report tables.
    Eval(EvalArgs),
    /// Sweep seeds per class for the semi-supervised mode.
    Sweep(SweepArgs),
    /// Print corpus statistics.
    Inspect(CorpusArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = parse_preset)]
    pub preset: Preset,
    /// Output data file.
    #[arg(long)]
    pub data: PathBuf,
    /// Output manifest file.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub steps: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Ambient embedding dimension.
    #[arg(long, default_value_t = 10)]
    pub features: usize,
    /// Distance between class means in units of sigma.
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub drift: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Output data file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlignKind {
    Unsup,
    Semi,
    SemiClst,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Output file for aligned coordinates.
    #[arg(long)]
    pub out: PathBuf,
    /// Source step (labeled train rows).
    #[arg(long)]
    pub source: u32,
    /// Target step (all rows).
    #[arg(long)]
    pub target: u32,
    #[arg(long, value_enum, default_value_t = AlignKind::Semi)]
    pub kind: AlignKind,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub seeds_per_class: usize,
    #[arg(long, default_value_t = 5)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifierKind {
    Knn,
    Centroid,
    Svm,
    Mlp,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub seeds_per_class: usize,
    #[arg(long, default_value_t = 5)]
    pub clusters: usize,
    #[arg(long, value_enum, default_value_t = ClassifierKind::Svm)]
    pub classifier: ClassifierKind,
    /// Neighbours for the knn classifier.
    #[arg(long, default_value_t = 1)]
    pub knn_k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub svm_c: f64,
    /// RBF width; default 1 / (features * mean feature variance).
    #[arg(long)]
    pub svm_gamma: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub mlp_hidden: usize,
    #[arg(long, default_value_t = 5)]
    pub mlp_epochs: usize,
    #[arg(long)]
    pub oversample: bool,
    #[arg(long)]
    pub all_includes_future: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Output directory for accuracy.csv, macro_f1.csv and report.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Mode column to run; repeat for several (default: all eight).
    #[arg(long = "mode", value_parser = parse_mode)]
    pub modes: Vec<Mode>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Output table.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
    pub m_grid: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    pub repetitions: usize,
    #[arg(long, value_parser = parse_metric, default_value = "accuracy")]
    pub metric: Metric,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: SsaError| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: SsaError| e.to_string())
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    s.parse().map_err(|e: SsaError| e.to_string())
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let mut outputs = Outputs::default();
    match run(cli, &mut outputs) {
        Ok(()) => 0,
        Err(e) => {
            outputs.remove_all();
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            }
        }
    }
}

/// Files written so far, removed again if the command fails.
#[derive(Default)]
struct Outputs {
    paths: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, path: &Path, text: &str) -> Result<()> {
        self.paths.push(path.to_path_buf());
        fs::write(path, text)?;
        Ok(())
    }

    fn remove_all(&mut self) {
        for p in self.paths.drain(..) {
            let _ = fs::remove_file(p);
        }
    }
}

fn run(cli: Cli, outputs: &mut Outputs) -> Result<()> {
    match cli.jobs {
        Some(0) => return Err(SsaError::InvalidConfig("--jobs must be >= 1".into())),
        Some(n) => {
            // A pool may already exist when embedded; that is harmless.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        None => {}
    }
    match cli.command {
        Command::Synth(a) => synth(a, outputs),
        Command::Split(a) => split(a, outputs),
        Command::Align(a) => align(a, outputs),
        Command::Eval(a) => eval(a, cli.jobs, outputs),
        Command::Sweep(a) => sweep(a, cli.jobs, outputs),
        Command::Inspect(a) => inspect(a),
    }
}

fn print_config(lines: &[(&str, String)]) {
    let mut err = std::io::stderr().lock();
    for (k, v) in lines {
        let _ = writeln!(err, "# {k} = {v}");
    }
}

fn resolve_dim(dim: Option<usize>) -> Result<usize> {
    match dim {
        Some(0) => Err(SsaError::InvalidConfig("--dim must be >= 1".into())),
        Some(d) => Ok(d),
        None => {
            log::warn!("no --dim given; using the default subspace dimension d={DEFAULT_DIM}");
            eprintln!("note: subspace dimension defaults to d={DEFAULT_DIM}; pass --dim to choose it");
            Ok(DEFAULT_DIM)
        }
    }
}

fn synth(a: SynthArgs, outputs: &mut Outputs) -> Result<()> {
    let config = SynthConfig {
        preset: a.preset,
        dim: a.features,
        classes: a.classes,
        per_class: a.per_class,
        steps: a.steps,
        separation: a.separation,
        sigma: a.sigma,
        drift: a.drift,
        rng_seed: a.seed,
    };
    print_config(&[
        ("preset", config.preset.to_string()),
        ("steps", config.steps.to_string()),
        ("per_class", config.per_class.to_string()),
        ("classes", config.classes.to_string()),
        ("features", config.dim.to_string()),
        ("separation", config.separation.to_string()),
        ("sigma", config.sigma.to_string()),
        ("drift", config.drift.to_string()),
        ("seed", config.rng_seed.to_string()),
    ]);
    let corpus = split_corpus(&generate_synthetic(&config)?, DEFAULT_FRACTIONS, a.seed)?;
    outputs.write(&a.manifest, &render_manifest(&corpus.manifest))?;
    outputs.write(&a.data, &render_data(&corpus))?;
    Ok(())
}

fn split(a: SplitArgs, outputs: &mut Outputs) -> Result<()> {
    print_config(&[("fractions", "0.8/0.1/0.1".into()), ("seed", a.seed.to_string())]);
    let corpus = read_corpus(&a.corpus.data, &a.corpus.manifest)?;
    let out = split_corpus(&corpus, DEFAULT_FRACTIONS, a.seed)?;
    outputs.write(&a.out, &render_data(&out))
}

fn align(a: AlignArgs, outputs: &mut Outputs) -> Result<()> {
    let d = resolve_dim(a.dim)?;
    if a.kind != AlignKind::Unsup && a.seeds_per_class == 0 {
        return Err(SsaError::InvalidConfig("--seeds-per-class must be >= 1".into()));
    }
    let corpus = read_corpus(&a.corpus.data, &a.corpus.manifest)?;
    for step in [a.source, a.target] {
        if !corpus.manifest.steps.contains_key(&step) {
            return Err(SsaError::InvalidConfig(format!("step {step} is not in the manifest")));
        }
    }

    let source_rows: Vec<usize> = corpus
        .select(a.source, Some(Split::Train))
        .into_iter()
        .filter(|&i| corpus.records[i].label.is_some())
        .collect();
    let source = JointSpace::labeled_leaf(
        a.source,
        corpus.matrix(&source_rows)?,
        source_rows.iter().map(|&i| corpus.records[i].label.clone().expect("filtered")).collect(),
        source_rows.iter().map(|&i| corpus.records[i].id.clone()).collect(),
    )?;
    let seeds = match a.kind {
        AlignKind::Unsup => Default::default(),
        _ => select_seeds(&corpus, a.target, a.seeds_per_class, a.seed)?,
    };
    let target_rows = corpus.select(a.target, None);
    let labels: Vec<_> = target_rows
        .iter()
        .map(|&i| {
            let id = &corpus.records[i].id;
            seeds.entries.iter().find(|(s, _)| s == id).map(|(_, l)| l.clone())
        })
        .collect();
    let is_seed = labels.iter().map(Option::is_some).collect();
    let target = JointSpace::leaf(
        a.target,
        corpus.matrix(&target_rows)?,
        labels,
        target_rows.iter().map(|&i| corpus.records[i].id.clone()).collect(),
        is_seed,
    )?;

    let kind = match a.kind {
        AlignKind::Unsup => JoinKind::Unsupervised,
        AlignKind::Semi => JoinKind::SemiSupervised { use_clusters: false },
        AlignKind::SemiClst => JoinKind::SemiSupervised { use_clusters: true },
    };
    let leaves = [source, target];
    let effective = effective_tree_dim(d, &leaves);
    if effective == 0 {
        return Err(SsaError::DegenerateInput("a step has fewer than 2 rows".into()));
    }
    print_config(&[
        ("source", a.source.to_string()),
        ("target", a.target.to_string()),
        ("kind", format!("{:?}", a.kind).to_lowercase()),
        ("dim", format!("{d} (effective {effective})")),
        ("seeds_per_class", a.seeds_per_class.to_string()),
        ("clusters", a.clusters.to_string()),
        ("seed", a.seed.to_string()),
    ]);
    let config = TreeConfig {
        d: effective,
        kind,
        clusters: a.clusters,
        rng_seed: a.seed,
    };
    let joint = join_with(&leaves[0], &leaves[1], &config)?;

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["id".to_string(), "step".into(), "label".into(), "is_seed".into()];
    header.extend((0..joint.dim()).map(|j| format!("z{j}")));
    w.write_record(&header)?;
    for i in 0..joint.len() {
        let mut row = vec![
            joint.sample_ids[i].clone(),
            joint.origin_steps[i].to_string(),
            joint.labels[i].clone().unwrap_or_default(),
            joint.is_seed[i].to_string(),
        ];
        row.extend(joint.coords.row(i).iter().map(|v| format!("{v:.16e}")));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| SsaError::Io(e.into_error()))?;
    outputs.write(&a.out, &String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn run_config(a: &RunArgs, modes: Vec<Mode>) -> Result<RunConfig> {
    let classifier = match a.classifier {
        ClassifierKind::Knn => ClassifierSpec::Knn { k: a.knn_k },
        ClassifierKind::Centroid => ClassifierSpec::Centroid,
        ClassifierKind::Svm => ClassifierSpec::Svm(SvmSettings {
            c: a.svm_c,
            gamma: a.svm_gamma,
            ..SvmSettings::default()
        }),
        ClassifierKind::Mlp => ClassifierSpec::Mlp(MlpSettings {
            hidden: a.mlp_hidden,
            epochs: a.mlp_epochs,
            ..MlpSettings::default()
        }),
    };
    if let ClassifierSpec::Svm(s) = &classifier {
        if s.c.is_nan() || s.c <= 0.0 || s.gamma.is_some_and(|g| g.is_nan() || g <= 0.0) {
            return Err(SsaError::InvalidConfig("--svm-c and --svm-gamma must be positive".into()));
        }
    }
    let config = RunConfig {
        d: resolve_dim(a.dim)?,
        seeds_per_class: a.seeds_per_class,
        classifier,
        modes: if modes.is_empty() { Mode::ALL.to_vec() } else { modes },
        rng_seed: a.seed,
        clusters: a.clusters,
        oversample: a.oversample,
        all_includes_future: a.all_includes_future,
    };
    config.validate()?;
    Ok(config)
}

fn print_run_config(config: &RunConfig, jobs: Option<usize>) {
    let modes: Vec<&str> = config.ordered_modes().iter().map(|m| m.name()).collect();
    print_config(&[
        ("dim", config.d.to_string()),
        ("seeds_per_class", config.seeds_per_class.to_string()),
        ("clusters", config.clusters.to_string()),
        ("classifier", serde_json::to_string(&config.classifier).expect("serializable")),
        ("modes", modes.join(",")),
        ("oversample", config.oversample.to_string()),
        ("all_includes_future", config.all_includes_future.to_string()),
        ("seed", config.rng_seed.to_string()),
        ("jobs", jobs.map_or_else(|| rayon::current_num_threads().to_string(), |j| j.to_string())),
    ]);
}

fn load(a: &RunArgs) -> Result<Corpus> {
    read_corpus(&a.corpus.data, &a.corpus.manifest)
}

fn eval(a: EvalArgs, jobs: Option<usize>, outputs: &mut Outputs) -> Result<()> {
    let config = run_config(&a.run, a.modes)?;
    print_run_config(&config, jobs);
    let corpus = load(&a.run)?;
    let report = run_protocol(&corpus, &config)?;
    fs::create_dir_all(&a.out)?;
    outputs.write(&a.out.join("accuracy.csv"), &report.render_table(Metric::Accuracy))?;
    outputs.write(&a.out.join("macro_f1.csv"), &report.render_table(Metric::MacroF1))?;
    outputs.write(&a.out.join("report.json"), &report.to_json())?;
    print!("{}", report.render_table(Metric::Accuracy));
    Ok(())
}

fn sweep(a: SweepArgs, jobs: Option<usize>, outputs: &mut Outputs) -> Result<()> {
    let config = run_config(&a.run, vec![Mode::Semi])?;
    print_run_config(&config, jobs);
    print_config(&[
        ("m_grid", a.m_grid.iter().map(usize::to_string).collect::<Vec<_>>().join(",")),
        ("repetitions", a.repetitions.to_string()),
        ("metric", a.metric.name().to_string()),
    ]);
    let corpus = load(&a.run)?;
    let points = sweep_seeds(&corpus, &config, &a.m_grid, a.repetitions, a.metric)?;
    let table = render_sweep(&points);
    outputs.write(&a.out, &table)?;
    print!("{table}");
    Ok(())
}

fn inspect(a: CorpusArgs) -> Result<()> {
    let corpus = read_corpus(&a.data, &a.manifest)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "dimension: {}", corpus.dim())?;
    writeln!(out, "records: {}", corpus.records.len())?;
    writeln!(out, "digest: {}", corpus.digest())?;
    writeln!(out, "step,name,label,train,dev,test")?;
    for step in corpus.steps() {
        let mut labels: Vec<Option<&String>> = corpus
            .records
            .iter()
            .filter(|r| r.step == step)
            .map(|r| r.label.as_ref())
            .collect();
        labels.sort();
        labels.dedup();
        for label in labels {
            let count = |split| {
                corpus
                    .records
                    .iter()
                    .filter(|r| r.step == step && r.split == split && r.label.as_ref() == label)
                    .count()
            };
            writeln!(
                out,
                "{step},{},{},{},{},{}",
                corpus.step_name(step),
                label.map_or("<unlabeled>", String::as_str),
                count(Split::Train),
                count(Split::Dev),
                count(Split::Test)
            )?;
        }
    }
    Ok(())
}
