//! `raw.csv`, `summary.csv` and `manifest.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::stats::{sem_stats, Correction, SummaryRow};
use crate::{Error, Result};

pub const RAW_FILE: &str = "raw.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One metric from one (condition, replication) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    /// `key=value;key=value` over the grid axes, or `all`.
    pub condition: String,
    pub replication: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

/// A cell whose pipeline returned an error or panicked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub condition: String,
    pub replication: usize,
    pub seed: u64,
    pub error: String,
}

/// Everything needed to rerun and audit a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub replications: usize,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    /// Spec file text that reproduces this run.
    pub spec: String,
    pub params: std::collections::BTreeMap<String, Vec<String>>,
    /// Parameters nobody set, with the default they took.
    pub defaulted: std::collections::BTreeMap<String, Vec<String>>,
    pub axes: Vec<String>,
    pub conditions: Vec<String>,
    pub correction: String,
    pub failures: Vec<Failure>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `rows` with a header, even when there are none.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

pub const RAW_HEADER: &[&str] = &["experiment", "condition", "replication", "seed", "metric", "value"];
pub const SUMMARY_HEADER: &[&str] = &["condition", "metric", "mean", "sem", "n"];

pub fn write_manifest(path: &Path, m: &Manifest) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, m)?;
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// The three output paths under `dir`.
pub fn paths(dir: &Path) -> [PathBuf; 3] {
    [dir.join(RAW_FILE), dir.join(SUMMARY_FILE), dir.join(MANIFEST_FILE)]
}

fn same(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Recomputes the summary from `raw.csv` and compares it with `summary.csv`.
pub fn verify(dir: &Path, correction: &Correction) -> Result<()> {
    let [raw, summary, _] = paths(dir);
    let rows: Vec<ResultRow> = read_csv(&raw)?;
    let written: Vec<SummaryRow> = read_csv(&summary)?;
    let fresh = sem_stats(&rows, correction)?;
    if fresh.len() != written.len() {
        return Err(Error::Verify(format!("{} rows recomputed, {} written", fresh.len(), written.len())));
    }
    for (a, b) in fresh.iter().zip(&written) {
        if a.condition != b.condition || a.metric != b.metric || a.n != b.n || !same(a.mean, b.mean) || !same(a.sem, b.sem) {
            return Err(Error::Verify(format!("{a:?} != {b:?}")));
        }
    }
    Ok(())
}
