//! Corpus files.
//!
//! Data: UTF-8 CSV, LF line endings, header `id,step,split,label,e0,...,e{D-1}`,
//! empty label for unlabeled rows, floats with 17 significant digits.
//!
//! Manifest: TOML with `dimension`, `labels`, and a `[steps]` table mapping
//! integer indices to display names.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Deserialize;

use super::{Corpus, EmbeddingRecord, Manifest};
use crate::error::{Result, SsaError};

const FIXED_COLUMNS: [&str; 4] = ["id", "step", "split", "label"];

pub fn read_corpus(data_path: impl AsRef<Path>, manifest_path: impl AsRef<Path>) -> Result<Corpus> {
    let manifest = parse_manifest(&read_text(manifest_path.as_ref())?)?;
    parse_data(&read_text(data_path.as_ref())?, manifest)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

pub fn write_corpus(corpus: &Corpus, data_path: impl AsRef<Path>, manifest_path: impl AsRef<Path>) -> Result<()> {
    fs::write(manifest_path, render_manifest(&corpus.manifest))?;
    fs::write(data_path, render_data(corpus))?;
    Ok(())
}

/// Writes the data table to any sink.
pub fn write_corpus_to<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    out.write_all(render_data(corpus).as_bytes())?;
    Ok(())
}

#[derive(Deserialize)]
struct RawManifest {
    dimension: usize,
    steps: BTreeMap<String, String>,
    labels: Vec<String>,
}

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let raw: RawManifest = toml::from_str(text).map_err(|e| SsaError::Parse(format!("manifest: {e}")))?;
    if raw.dimension == 0 {
        return Err(SsaError::Parse("manifest: dimension must be >= 1".into()));
    }
    let steps = raw
        .steps
        .into_iter()
        .map(|(k, v)| {
            k.parse::<u32>()
                .map(|k| (k, v))
                .map_err(|_| SsaError::Parse(format!("manifest: step key `{k}` is not a non-negative integer")))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let mut seen = HashSet::new();
    for l in &raw.labels {
        if l.is_empty() || !seen.insert(l) {
            return Err(SsaError::Parse(format!("manifest: bad or repeated label `{l}`")));
        }
    }
    Ok(Manifest {
        dimension: raw.dimension,
        steps,
        labels: raw.labels,
    })
}

pub fn render_manifest(manifest: &Manifest) -> String {
    let quote = |s: &str| toml::Value::String(s.to_string()).to_string();
    let labels: Vec<String> = manifest.labels.iter().map(|l| quote(l)).collect();
    let mut out = format!("dimension = {}\nlabels = [{}]\n\n[steps]\n", manifest.dimension, labels.join(", "));
    for (k, v) in &manifest.steps {
        out.push_str(&format!("{k} = {}\n", quote(v)));
    }
    out
}

fn header(dim: usize) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..dim).map(|j| format!("e{j}")))
        .collect()
}

pub fn render_data(corpus: &Corpus) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header(corpus.dim())).expect("in-memory write");
    for r in &corpus.records {
        let mut row = vec![
            r.id.clone(),
            r.step.to_string(),
            r.split.to_string(),
            r.label.clone().unwrap_or_default(),
        ];
        row.extend(r.vector.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn parse_data(text: &str, manifest: Manifest) -> Result<Corpus> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();
    let expected = header(manifest.dimension);
    let head = rows.next().ok_or_else(|| SsaError::MalformedHeader("empty file".into()))??;
    if head.iter().ne(expected.iter().map(String::as_str)) {
        return Err(SsaError::MalformedHeader(format!(
            "expected `{}`, got `{}`",
            expected.join(","),
            head.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut records = Vec::new();
    for (i, row) in rows.enumerate() {
        let row = row?;
        let line = i + 2;
        if row.len() != expected.len() {
            return Err(SsaError::RaggedRow {
                line,
                expected: expected.len(),
                got: row.len(),
            });
        }
        let step = row[1]
            .parse::<u32>()
            .map_err(|_| SsaError::Parse(format!("line {line}: bad step `{}`", &row[1])))?;
        let vector = row
            .iter()
            .skip(4)
            .map(|v| v.parse::<f64>().map_err(|_| SsaError::Parse(format!("line {line}: bad number `{v}`"))))
            .collect::<Result<Vec<f64>>>()?;
        records.push(EmbeddingRecord {
            id: row[0].to_string(),
            step,
            split: row[2].parse()?,
            label: (!row[3].is_empty()).then(|| row[3].to_string()),
            vector,
        });
    }
    Corpus::new(records, manifest)
}
