//! Python bindings: PCA bases, pairwise alignment, corpora, and the
//! evaluation protocol. Matrices cross the boundary as lists of row lists.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use ssa_core::alignment::{self as al, DomainData, SeedSet};
use ssa_core::classify::{ClassifierSpec, MlpSettings, SvmSettings};
use ssa_core::data::{self, Preset, SynthConfig, DEFAULT_FRACTIONS};
use ssa_core::eval::{self, Metric, Mode, RunConfig};
use ssa_core::linalg::{self, SampleMatrix};

create_exception!(ssa, SsaError, PyException);

fn err(e: ssa_core::SsaError) -> PyErr {
    SsaError::new_err(e.to_string())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(SsaError::new_err(format!("row {bad} has {} columns, expected {ncols}", rows[bad].len())));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn domain(x: Vec<Vec<f64>>, prefix: &str) -> PyResult<DomainData> {
    let x = SampleMatrix::new(matrix(x)?).map_err(err)?;
    let ids = (0..x.nrows()).map(|i| format!("{prefix}{i}")).collect();
    DomainData::new(x, ids).map_err(err)
}

/// A fitted PCA basis: `components` is D x d, one column per direction.
#[pyclass(name = "SubspaceBasis", frozen)]
struct PySubspaceBasis {
    inner: linalg::SubspaceBasis,
}

#[pymethods]
impl PySubspaceBasis {
    #[getter]
    fn components(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.components)
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean.iter().copied().collect()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn project(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.project(&matrix(x)?).map_err(err)?))
    }

    fn __repr__(&self) -> String {
        format!("SubspaceBasis(ambient={}, d={})", self.inner.ambient_dim(), self.inner.dim())
    }
}

#[pyfunction]
fn fit_pca(x: Vec<Vec<f64>>, d: usize) -> PyResult<PySubspaceBasis> {
    let inner = linalg::fit_pca(&matrix(x)?, d).map_err(err)?;
    Ok(PySubspaceBasis { inner })
}

/// `C_s^T C_t` for two fitted bases of equal shape.
#[pyfunction]
fn solve_alignment(source: &PySubspaceBasis, target: &PySubspaceBasis) -> PyResult<Vec<Vec<f64>>> {
    let m = linalg::solve_alignment(&source.inner, &target.inner).map_err(err)?;
    Ok(rows(&m.m))
}

type Rows = Vec<Vec<f64>>;

/// Returns `(source_coords, target_coords)` in the target subspace.
#[pyfunction]
fn align_unsupervised(
    source: Vec<Vec<f64>>,
    target: Vec<Vec<f64>>,
    d: usize,
) -> PyResult<(Rows, Rows)> {
    let pair = al::align_unsupervised(&domain(source, "s")?, &domain(target, "t")?, d).map_err(err)?;
    Ok((rows(&pair.source_coords), rows(&pair.target_coords)))
}

/// Per-class alignment. `seeds` maps target row indices to labels. Returns
/// `(source_coords, target_coords, target_labels)`.
#[pyfunction]
#[pyo3(signature = (source, source_labels, target, seeds, d, use_clusters=false, rng_seed=0))]
fn align_semi_supervised(
    source: Vec<Vec<f64>>,
    source_labels: Vec<String>,
    target: Vec<Vec<f64>>,
    seeds: BTreeMap<usize, String>,
    d: usize,
    use_clusters: bool,
    rng_seed: u64,
) -> PyResult<(Rows, Rows, Vec<Option<String>>)> {
    let source = domain(source, "s")?.with_labels(source_labels).map_err(err)?;
    let target = domain(target, "t")?;
    let seeds = SeedSet::new(seeds.into_iter().map(|(i, l)| (format!("t{i}"), l)).collect()).map_err(err)?;
    let pair = al::align_semi_supervised(&source, &target, &seeds, d, use_clusters, rng_seed).map_err(err)?;
    Ok((rows(&pair.source_coords), rows(&pair.target_coords), pair.target_labels))
}

/// Accuracy, macro-F1 and per-class F1 as a dict.
#[pyfunction]
fn metrics(py: Python<'_>, predictions: Vec<String>, truth: Vec<String>) -> PyResult<Py<PyAny>> {
    let m = eval::metrics(&predictions, &truth).map_err(err)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("accuracy", m.accuracy)?;
    out.set_item("macro_f1", m.macro_f1)?;
    out.set_item("per_class_f1", m.per_class_f1)?;
    out.set_item("support", m.support)?;
    Ok(out.into_any().unbind())
}

#[pyclass(name = "Corpus", frozen)]
struct PyCorpus {
    inner: data::Corpus,
}

#[pymethods]
impl PyCorpus {
    #[staticmethod]
    fn read(data_path: &str, manifest_path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: data::read_corpus(data_path, manifest_path).map_err(err)?,
        })
    }

    /// Synthetic corpus from a preset, already split 80/10/10.
    #[staticmethod]
    #[pyo3(signature = (preset, steps=4, per_class=100, classes=2, features=10, separation=4.0, sigma=1.0, drift=0.5, rng_seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn synth(
        preset: &str,
        steps: usize,
        per_class: usize,
        classes: usize,
        features: usize,
        separation: f64,
        sigma: f64,
        drift: f64,
        rng_seed: u64,
    ) -> PyResult<Self> {
        let config = SynthConfig {
            preset: preset.parse::<Preset>().map_err(err)?,
            dim: features,
            classes,
            per_class,
            steps,
            separation,
            sigma,
            drift,
            rng_seed,
        };
        let corpus = data::generate_synthetic(&config).map_err(err)?;
        Ok(Self {
            inner: data::split_corpus(&corpus, DEFAULT_FRACTIONS, rng_seed).map_err(err)?,
        })
    }

    fn write(&self, data_path: &str, manifest_path: &str) -> PyResult<()> {
        data::write_corpus(&self.inner, data_path, manifest_path).map_err(err)
    }

    #[pyo3(signature = (rng_seed=0))]
    fn split(&self, rng_seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: data::split_corpus(&self.inner, DEFAULT_FRACTIONS, rng_seed).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn steps(&self) -> Vec<u32> {
        self.inner.steps()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.manifest.labels.clone()
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }
}

#[pyclass(name = "Report", frozen)]
struct PyReport {
    inner: eval::Report,
}

#[pymethods]
impl PyReport {
    fn accuracy_table(&self) -> String {
        self.inner.render_table(Metric::Accuracy)
    }

    fn macro_f1_table(&self) -> String {
        self.inner.render_table(Metric::MacroF1)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// `(accuracy, macro_f1)` of one cell, or None if it was not run.
    fn cell(&self, test_step: u32, mode: &str) -> PyResult<Option<(f64, f64)>> {
        let mode: Mode = mode.parse().map_err(err)?;
        Ok(self
            .inner
            .cell(test_step, mode)
            .map(|c| (c.metrics.accuracy, c.metrics.macro_f1)))
    }

    fn average(&self, mode: &str) -> PyResult<Option<(f64, f64)>> {
        let mode: Mode = mode.parse().map_err(err)?;
        Ok(self.inner.averages.get(&mode).map(|a| (a.accuracy, a.macro_f1)))
    }
}

fn classifier(name: &str) -> PyResult<ClassifierSpec> {
    Ok(match name {
        "knn" => ClassifierSpec::Knn { k: 1 },
        "centroid" => ClassifierSpec::Centroid,
        "svm" => ClassifierSpec::Svm(SvmSettings::default()),
        "mlp" => ClassifierSpec::Mlp(MlpSettings::default()),
        other => return Err(SsaError::new_err(format!("unknown classifier `{other}`"))),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_config(
    d: usize,
    seeds_per_class: usize,
    classifier_name: &str,
    modes: Option<Vec<String>>,
    rng_seed: u64,
    clusters: usize,
    oversample: bool,
    all_includes_future: bool,
) -> PyResult<RunConfig> {
    let modes = match modes {
        Some(names) => names.iter().map(|m| m.parse::<Mode>()).collect::<Result<_, _>>().map_err(err)?,
        None => Mode::ALL.to_vec(),
    };
    Ok(RunConfig {
        d,
        seeds_per_class,
        classifier: classifier(classifier_name)?,
        modes,
        rng_seed,
        clusters,
        oversample,
        all_includes_future,
    })
}

#[pyfunction]
#[pyo3(signature = (corpus, d=100, seeds_per_class=10, classifier="svm", modes=None, rng_seed=0, clusters=5, oversample=false, all_includes_future=false))]
#[allow(clippy::too_many_arguments)]
fn run_protocol(
    py: Python<'_>,
    corpus: &PyCorpus,
    d: usize,
    seeds_per_class: usize,
    classifier: &str,
    modes: Option<Vec<String>>,
    rng_seed: u64,
    clusters: usize,
    oversample: bool,
    all_includes_future: bool,
) -> PyResult<PyReport> {
    let config = run_config(d, seeds_per_class, classifier, modes, rng_seed, clusters, oversample, all_includes_future)?;
    let inner = py.detach(|| eval::run_protocol(&corpus.inner, &config)).map_err(err)?;
    Ok(PyReport { inner })
}

/// List of `(m, mean, lower, upper)` for the semi-supervised mode.
#[pyfunction]
#[pyo3(signature = (corpus, m_grid, d=100, classifier="svm", repetitions=5, rng_seed=0))]
fn sweep_seeds(
    py: Python<'_>,
    corpus: &PyCorpus,
    m_grid: Vec<usize>,
    d: usize,
    classifier: &str,
    repetitions: usize,
    rng_seed: u64,
) -> PyResult<Vec<(usize, f64, f64, f64)>> {
    let config = run_config(d, 1, classifier, Some(vec!["semi".into()]), rng_seed, 5, false, false)?;
    let points = py
        .detach(|| eval::sweep_seeds(&corpus.inner, &config, &m_grid, repetitions, Metric::Accuracy))
        .map_err(err)?;
    Ok(points.into_iter().map(|p| (p.m, p.mean, p.lower, p.upper)).collect())
}

#[pymodule]
fn ssa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SsaError", m.py().get_type::<SsaError>())?;
    m.add_class::<PySubspaceBasis>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(fit_pca, m)?)?;
    m.add_function(wrap_pyfunction!(solve_alignment, m)?)?;
    m.add_function(wrap_pyfunction!(align_unsupervised, m)?)?;
    m.add_function(wrap_pyfunction!(align_semi_supervised, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_seeds, m)?)?;
    Ok(())
}
