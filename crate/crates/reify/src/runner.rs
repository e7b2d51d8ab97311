//! Executes every (condition, replication) cell of a resolved spec on a
//! worker pool and collects the results in grid order.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::experiments::EXPERIMENTS;
use crate::output::{self, Failure, Manifest, ResultRow, RAW_HEADER, SUMMARY_HEADER};
use crate::spec::{Condition, ExperimentSpec};
use crate::stats::{sem_stats, Correction, SummaryRow};
use crate::{Error, Result, WORKERS_ENV};

pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub manifest: Manifest,
}

impl RunOutput {
    /// Summary entry for `metric` under the condition whose axis bindings
    /// include every pair in `at`.
    pub fn find(&self, at: &[(&str, &str)], metric: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| {
            s.metric == metric && {
                let pairs = crate::spec::label_pairs(&s.condition);
                at.iter().all(|(k, v)| pairs.iter().any(|(pk, pv)| pk == k && pv == v))
            }
        })
    }

    /// Raw values of `metric` under matching conditions, in replication order.
    pub fn values(&self, at: &[(&str, &str)], metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| {
                r.metric == metric && {
                    let pairs = crate::spec::label_pairs(&r.condition);
                    at.iter().all(|(k, v)| pairs.iter().any(|(pk, pv)| pk == k && pv == v))
                }
            })
            .map(|r| r.value)
            .collect()
    }
}

/// Worker count from the environment, or rayon's default when unset.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Spec(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

fn run_cell(run: fn(&Condition, u64) -> Result<crate::experiments::Metrics>, c: &Condition, seed: u64) -> Result<crate::experiments::Metrics, String> {
    match catch_unwind(AssertUnwindSafe(|| run(c, seed))) {
        Ok(Ok(m)) => Ok(m),
        Ok(Err(e)) => Err(e.to_string()),
        Err(panic) => Err(panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into())),
    }
}

/// Runs the spec. With `dir`, writes `raw.csv`, `summary.csv` and
/// `manifest.json` there and checks the summary against the raw rows.
/// `progress` prints one line per finished cell to stderr.
pub fn run(spec: &ExperimentSpec, dir: Option<&Path>, progress: bool) -> Result<RunOutput> {
    let resolved = spec.resolve()?;
    let def = &EXPERIMENTS[resolved.experiment];
    let conditions = resolved.conditions();
    let seeds = resolved.seeds();
    let cells: Vec<(usize, usize)> = (0..conditions.len())
        .flat_map(|c| (0..seeds.len()).map(move |r| (c, r)))
        .collect();
    let total = cells.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| Error::Spec(format!("worker pool: {e}")))?;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<_> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(ci, r)| {
                let start = Instant::now();
                let out = run_cell(def.run, &conditions[ci], seeds[r]);
                if progress {
                    let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                    let status = if out.is_ok() { "ok" } else { "FAILED" };
                    eprintln!(
                        "[{k}/{total}] {} rep {r}: {status} ({:.1}s)",
                        conditions[ci].label(),
                        start.elapsed().as_secs_f64()
                    );
                }
                out
            })
            .collect()
    });

    let experiment = resolved.experiment.name().to_string();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&(ci, r), res) in cells.iter().zip(results) {
        let condition = conditions[ci].label();
        match res {
            Ok(metrics) => rows.extend(metrics.into_iter().map(|(metric, value)| ResultRow {
                experiment: experiment.clone(),
                condition: condition.clone(),
                replication: r,
                seed: seeds[r],
                metric: metric.to_string(),
                value,
            })),
            Err(error) => failures.push(Failure {
                condition,
                replication: r,
                seed: seeds[r],
                error,
            }),
        }
    }

    let correction = match def.matched_axis {
        Some(axis) if resolved.axes.iter().any(|a| a == axis) => Correction::Matched(axis.to_string()),
        _ => Correction::Plain,
    };
    let summary = sem_stats(&rows, &correction)?;
    let manifest = Manifest {
        experiment,
        version: env!("CARGO_PKG_VERSION").to_string(),
        replications: resolved.replications,
        base_seed: resolved.base_seed,
        seeds,
        spec: spec.to_toml(),
        params: resolved.values.clone(),
        defaulted: resolved.defaulted.clone(),
        axes: resolved.axes.clone(),
        conditions: conditions.iter().map(Condition::label).collect(),
        correction: correction.describe(),
        failures,
    };

    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let [raw, sum, man] = output::paths(dir);
        output::write_csv(&raw, RAW_HEADER, &rows)?;
        output::write_csv(&sum, SUMMARY_HEADER, &summary)?;
        output::write_manifest(&man, &manifest)?;
        output::verify(dir, &correction)?;
    }
    Ok(RunOutput { rows, summary, manifest })
}
