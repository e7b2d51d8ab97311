//! Per-condition mean and standard error, optionally corrected for matched
//! comparisons.
//!
//! The matched correction removes replication main effects: each value has
//! the mean of its replication (over the levels of the compared axis, other
//! axes held fixed) subtracted and the grand mean of that comparison group
//! added back. The SEM is then `sd/√n` of the adjusted values.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::output::ResultRow;
use crate::spec::label_pairs;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Correction {
    Plain,
    /// Levels of this axis are compared within each replication.
    Matched(String),
}

impl Correction {
    pub fn describe(&self) -> String {
        match self {
            Correction::Plain => "plain".into(),
            Correction::Matched(axis) => format!("matched:{axis}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub condition: String,
    pub metric: String,
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
}

/// Condition label with the matched axis removed.
fn group_key(condition: &str, axis: &str) -> String {
    label_pairs(condition)
        .into_iter()
        .filter(|(k, _)| k != axis)
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation over √n; NaN below two values.
fn sem(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

/// Summary rows in first-appearance order of `(condition, metric)`.
///
/// Errors when no condition has more than one replication. A condition left
/// with a single value (after failures) reports a NaN SEM.
pub fn sem_stats(rows: &[ResultRow], correction: &Correction) -> Result<Vec<SummaryRow>> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut cells: HashMap<(String, String), Vec<&ResultRow>> = HashMap::new();
    for r in rows {
        let key = (r.condition.clone(), r.metric.clone());
        cells
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    if !rows.is_empty() && cells.values().all(|c| c.len() < 2) {
        return Err(Error::Stats("standard errors need at least 2 replications".into()));
    }

    // For the matched case: per (group, metric, replication) the mean across
    // the compared levels, and per (group, metric) the grand mean.
    let mut rep_mean: HashMap<(String, String, usize), f64> = HashMap::new();
    let mut grand: HashMap<(String, String), f64> = HashMap::new();
    if let Correction::Matched(axis) = correction {
        let mut by_rep: HashMap<(String, String, usize), Vec<f64>> = HashMap::new();
        let mut by_group: HashMap<(String, String), Vec<f64>> = HashMap::new();
        for r in rows {
            let g = group_key(&r.condition, axis);
            by_rep.entry((g.clone(), r.metric.clone(), r.replication)).or_default().push(r.value);
            by_group.entry((g, r.metric.clone())).or_default().push(r.value);
        }
        rep_mean = by_rep.into_iter().map(|(k, v)| (k, mean(&v))).collect();
        grand = by_group.into_iter().map(|(k, v)| (k, mean(&v))).collect();
    }

    Ok(order
        .into_iter()
        .map(|key| {
            let cell = &cells[&key];
            let raw: Vec<f64> = cell.iter().map(|r| r.value).collect();
            let adjusted: Vec<f64> = match correction {
                Correction::Plain => raw.clone(),
                Correction::Matched(axis) => cell
                    .iter()
                    .map(|r| {
                        let g = group_key(&r.condition, axis);
                        r.value - rep_mean[&(g.clone(), r.metric.clone(), r.replication)] + grand[&(g, r.metric.clone())]
                    })
                    .collect(),
            };
            SummaryRow {
                condition: key.0,
                metric: key.1,
                mean: mean(&raw),
                sem: sem(&adjusted),
                n: raw.len(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(condition: &str, replication: usize, value: f64) -> ResultRow {
        ResultRow {
            experiment: "parity".into(),
            condition: condition.into(),
            replication,
            seed: replication as u64,
            metric: "acc".into(),
            value,
        }
    }

    fn table(values: &[(&str, usize, f64)]) -> Vec<ResultRow> {
        values.iter().map(|&(c, r, v)| row(c, r, v)).collect()
    }

    #[test]
    fn hand_two_by_two() {
        // rep 0: a=1, b=3; rep 1: a=3, b=7.
        let rows = table(&[("model=a", 0, 1.0), ("model=b", 0, 3.0), ("model=a", 1, 3.0), ("model=b", 1, 7.0)]);
        let plain = sem_stats(&rows, &Correction::Plain).unwrap();
        // a: mean 2, sd √2, sem 1. b: mean 5, sd 2√2, sem 2.
        assert_eq!((plain[0].mean, plain[0].sem, plain[0].n), (2.0, 1.0, 2));
        assert_eq!((plain[1].mean, plain[1].sem), (5.0, 2.0));

        // Rep means 2 and 5, grand 3.5. Adjusted a: 2.5, 1.5; b: 4.5, 5.5.
        let m = sem_stats(&rows, &Correction::Matched("model".into())).unwrap();
        assert_eq!(m[0].mean, 2.0);
        assert!((m[0].sem - 0.5).abs() < 1e-15);
        assert!((m[1].sem - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_offset_has_zero_matched_sem() {
        let mut vals = Vec::new();
        for (r, base) in [0.2, 0.9, 0.4, 0.7].into_iter().enumerate() {
            vals.push(("model=rnn", r, base));
            vals.push(("model=sdrnn", r, base + 0.1));
        }
        let rows = table(&vals);
        let plain = sem_stats(&rows, &Correction::Plain).unwrap();
        let m = sem_stats(&rows, &Correction::Matched("model".into())).unwrap();
        assert!(plain.iter().all(|s| s.sem > 0.0));
        assert!(m.iter().all(|s| s.sem.abs() < 1e-12), "{m:?}");
    }

    #[test]
    fn identical_values_give_zero_sem() {
        let rows = table(&[("model=a", 0, 0.5), ("model=b", 0, 0.5), ("model=a", 1, 0.5), ("model=b", 1, 0.5)]);
        for c in [Correction::Plain, Correction::Matched("model".into())] {
            assert!(sem_stats(&rows, &c).unwrap().iter().all(|s| s.sem == 0.0));
        }
    }

    #[test]
    fn matched_groups_respect_other_axes() {
        // l=1 and l=2 are separate comparison groups.
        let rows = table(&[
            ("l=1;model=a", 0, 0.0),
            ("l=1;model=b", 0, 1.0),
            ("l=2;model=a", 0, 10.0),
            ("l=2;model=b", 0, 11.0),
            ("l=1;model=a", 1, 2.0),
            ("l=1;model=b", 1, 3.0),
            ("l=2;model=a", 1, 20.0),
            ("l=2;model=b", 1, 21.0),
        ]);
        let m = sem_stats(&rows, &Correction::Matched("model".into())).unwrap();
        assert!(m.iter().all(|s| s.sem.abs() < 1e-12), "{m:?}");
    }

    #[test]
    fn single_replication_is_an_error() {
        let rows = table(&[("model=a", 0, 1.0), ("model=b", 0, 2.0)]);
        assert!(sem_stats(&rows, &Correction::Plain).is_err());
        assert!(sem_stats(&[], &Correction::Plain).unwrap().is_empty());
    }
}
