//! Merging run manifests into one pass/fail table.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{RunManifest, SCHEMA_VERSION};
use super::ExperimentError;
use crate::stats::EnsembleSummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub source: String,
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub kind: String,
    pub sources: Vec<String>,
    pub completed: usize,
    pub failures: usize,
    /// Moments summed across all sources.
    pub summary: EnsembleSummary,
    pub table: Vec<ReportRow>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.table.iter().all(|r| r.pass)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::io(path, e))
}

/// Accepts a manifest file or the directory holding `manifest.json`.
fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("manifest.json")
    } else {
        p.to_path_buf()
    }
}

/// Merges the stats of one or more runs of the same experiment. Moments
/// are combined by summation; every source's checks appear in the table.
/// When `out` is given, writes `report.json`, `report.csv` and one
/// `ecdf_*.csv` per stored ECDF table.
pub fn report(paths: &[PathBuf], out: Option<&Path>) -> Result<Report, ExperimentError> {
    if paths.is_empty() {
        return Err(ExperimentError::SchemaMismatch("no manifests given".into()));
    }
    let mut loaded = Vec::new();
    for p in paths {
        let mp = manifest_path(p);
        let manifest: RunManifest = read_json(&mp)?;
        let dir = mp.parent().unwrap_or(Path::new("."));
        let stats: EnsembleSummary = read_json(&dir.join("stats.json"))?;
        loaded.push((mp.display().to_string(), manifest, stats));
    }

    let (_, first, _) = &loaded[0];
    let reference = first.config.science();
    let mut seen = BTreeSet::new();
    for (src, m, _) in &loaded {
        if m.schema != SCHEMA_VERSION || m.version != first.version {
            return Err(ExperimentError::SchemaMismatch(format!(
                "{src} has version {} schema {}, expected {} schema {}",
                m.version, m.schema, first.version, SCHEMA_VERSION
            )));
        }
        if m.config.science() != reference {
            return Err(ExperimentError::SchemaMismatch(format!(
                "{src} was produced by a different experiment config"
            )));
        }
        for s in &m.seeds {
            if !seen.insert(s.replica) {
                return Err(ExperimentError::SchemaMismatch(format!(
                    "{src} repeats replica {}",
                    s.replica
                )));
            }
        }
    }

    let mut summary = loaded[0].2.clone();
    let mut table = Vec::new();
    for (i, (src, m, stats)) in loaded.iter().enumerate() {
        if i > 0 {
            summary.merge(stats);
        }
        for (test, rec) in &m.checks {
            table.push(ReportRow {
                source: src.clone(),
                test: test.clone(),
                statistic: rec.statistic,
                threshold: rec.threshold,
                pass: rec.pass,
            });
        }
    }
    if loaded.len() > 1 {
        summary.tests.clear();
        summary.ecdfs.clear();
    }
    let report = Report {
        version: first.version.clone(),
        kind: first.config.kind.name().into(),
        sources: loaded.iter().map(|l| l.0.clone()).collect(),
        completed: loaded.iter().map(|l| l.1.completed).sum(),
        failures: loaded.iter().map(|l| l.1.failures.len()).sum(),
        summary,
        table,
    };

    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        let path = dir.join("report.json");
        fs::write(&path, json).map_err(|e| ExperimentError::io(&path, e))?;
        let mut csv = String::from("source,test,statistic,threshold,pass\n");
        for r in &report.table {
            let _ = writeln!(csv, "{},{},{},{},{}", r.source, r.test, r.statistic, r.threshold, r.pass);
        }
        let path = dir.join("report.csv");
        fs::write(&path, csv).map_err(|e| ExperimentError::io(&path, e))?;
        for (i, (_, _, stats)) in loaded.iter().enumerate() {
            for (name, rows) in &stats.ecdfs {
                let clean: String = name
                    .chars()
                    .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
                    .collect();
                let file = if loaded.len() == 1 {
                    format!("ecdf_{clean}.csv")
                } else {
                    format!("ecdf_{i}_{clean}.csv")
                };
                let mut body = String::from("x,F\n");
                for (x, f) in rows {
                    let _ = writeln!(body, "{x},{f}");
                }
                let path = dir.join(file);
                fs::write(&path, body).map_err(|e| ExperimentError::io(&path, e))?;
            }
        }
    }
    Ok(report)
}
