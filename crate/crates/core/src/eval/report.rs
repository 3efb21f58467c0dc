use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::{Cell, Metrics, Mode, RunConfig};
use crate::data::Corpus;
use crate::error::{Result, SsaError};

/// Header of the per-metric tables.
pub const REPORT_COLUMNS: [&str; 9] = [
    "test_step",
    "all",
    "same",
    "prev",
    "unsup",
    "semi",
    "unsup_unb",
    "semi_unb",
    "semi_unb_clst",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    MacroF1,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::MacroF1 => "macro_f1",
        }
    }

    pub fn of(self, m: &Metrics) -> f64 {
        match self {
            Metric::Accuracy => m.accuracy,
            Metric::MacroF1 => m.macro_f1,
        }
    }
}

impl FromStr for Metric {
    type Err = SsaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "macro_f1" => Ok(Metric::MacroF1),
            other => Err(SsaError::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config: RunConfig,
    pub corpus_digest: String,
    pub dimension: usize,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub test_step: u32,
    pub step_name: String,
    pub cells: BTreeMap<Mode, Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Average {
    pub accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub provenance: Provenance,
    pub modes: Vec<Mode>,
    /// One row per test step, chronological.
    pub rows: Vec<ReportRow>,
    /// Unweighted mean over test steps, per mode.
    pub averages: BTreeMap<Mode, Average>,
}

impl Report {
    pub fn new(corpus: &Corpus, config: &RunConfig, cells: Vec<Cell>) -> Self {
        let mut rows: BTreeMap<u32, ReportRow> = BTreeMap::new();
        for cell in cells {
            rows.entry(cell.test_step)
                .or_insert_with(|| ReportRow {
                    test_step: cell.test_step,
                    step_name: corpus.step_name(cell.test_step).to_string(),
                    cells: BTreeMap::new(),
                })
                .cells
                .insert(cell.mode, cell);
        }
        let rows: Vec<ReportRow> = rows.into_values().collect();
        let modes = config.ordered_modes();
        let averages = modes
            .iter()
            .map(|&mode| {
                let cells: Vec<&Cell> = rows.iter().filter_map(|r| r.cells.get(&mode)).collect();
                let mean = |f: fn(&Metrics) -> f64| cells.iter().map(|c| f(&c.metrics)).sum::<f64>() / cells.len() as f64;
                (
                    mode,
                    Average {
                        accuracy: mean(|m| m.accuracy),
                        macro_f1: mean(|m| m.macro_f1),
                    },
                )
            })
            .collect();
        Self {
            provenance: Provenance {
                config: config.clone(),
                corpus_digest: corpus.digest(),
                dimension: corpus.dim(),
                version: env!("CARGO_PKG_VERSION"),
            },
            modes,
            rows,
            averages,
        }
    }

    pub fn cell(&self, test_step: u32, mode: Mode) -> Option<&Cell> {
        self.rows.iter().find(|r| r.test_step == test_step)?.cells.get(&mode)
    }

    /// One metric as a table: a row per test step plus `avg`. Modes that were
    /// not run are left empty.
    pub fn render_table(&self, metric: Metric) -> String {
        let mut out = REPORT_COLUMNS.join(",");
        out.push('\n');
        for row in &self.rows {
            let values = Mode::ALL.map(|m| row.cells.get(&m).map_or(String::new(), |c| metric.of(&c.metrics).to_string()));
            out.push_str(&format!("{},{}\n", csv_field(&row.step_name), values.join(",")));
        }
        let avg = Mode::ALL.map(|m| {
            self.averages.get(&m).map_or(String::new(), |a| {
                match metric {
                    Metric::Accuracy => a.accuracy,
                    Metric::MacroF1 => a.macro_f1,
                }
                .to_string()
            })
        });
        out.push_str(&format!("avg,{}\n", avg.join(",")));
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }

    /// Writes `accuracy.csv`, `macro_f1.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let files = [
            (dir.join("accuracy.csv"), self.render_table(Metric::Accuracy)),
            (dir.join("macro_f1.csv"), self.render_table(Metric::MacroF1)),
            (dir.join("report.json"), self.to_json()),
        ];
        let mut written = Vec::new();
        for (path, text) in files {
            if let Err(e) = fs::write(&path, text) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e.into());
            }
            written.push(path);
        }
        Ok(written)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{run_protocol, RunConfig};
    use super::*;
    use crate::classify::ClassifierSpec;
    use crate::data::{generate_synthetic, split_corpus, Preset, SynthConfig, DEFAULT_FRACTIONS};

    fn report(modes: Vec<Mode>) -> Report {
        let mut cfg = SynthConfig::new(Preset::GlobalShift, 8);
        cfg.steps = 3;
        cfg.dim = 3;
        cfg.per_class = 30;
        let corpus = split_corpus(&generate_synthetic(&cfg).unwrap(), DEFAULT_FRACTIONS, 0).unwrap();
        let config = RunConfig {
            d: 2,
            seeds_per_class: 3,
            classifier: ClassifierSpec::Centroid,
            modes,
            ..RunConfig::default()
        };
        run_protocol(&corpus, &config).unwrap()
    }

    #[test]
    fn header_and_layout() {
        let r = report(vec![Mode::Semi, Mode::Prev]);
        let table = r.render_table(Metric::Accuracy);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "test_step,all,same,prev,unsup,semi,unsup_unb,semi_unb,semi_unb_clst");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("step1,,,0") || lines[1].starts_with("step1,,,1"));
        assert!(lines[3].starts_with("avg,,,"));
        assert_eq!(lines[3].split(',').count(), 9);
        assert_eq!(r.modes, vec![Mode::Prev, Mode::Semi]);
    }

    #[test]
    fn averages_are_column_means() {
        let r = report(Mode::ALL.to_vec());
        for mode in Mode::ALL {
            let values: Vec<f64> = r.rows.iter().map(|row| row.cells[&mode].metrics.macro_f1).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            assert_close!(r.averages[&mode].macro_f1, mean, 1e-12);
        }
    }

    #[test]
    fn json_carries_provenance_and_per_class_scores() {
        let r = report(vec![Mode::Same]);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["provenance"]["corpus_digest"].as_str().unwrap().len(), 64);
        assert_eq!(v["provenance"]["config"]["classifier"]["kind"], "centroid");
        assert!(v["rows"][0]["cells"]["same"]["per_class_f1"]["c0"].is_number());
        assert!(v["averages"]["same"]["accuracy"].is_number());
    }

    #[test]
    fn quotes_awkward_step_names() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
