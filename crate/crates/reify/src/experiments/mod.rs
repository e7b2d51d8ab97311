//! Per-experiment parameters, defaults, and the pipeline behind one
//! (condition, replication) cell.

mod adversarial;
mod capacity;
mod recurrent;
mod score;

use crate::spec::{Condition, ExperimentId};
use crate::Result;

pub use recurrent::ModelKind;

/// A tunable with its default. A comma in `default` makes the parameter a
/// grid axis unless overridden.
#[derive(Clone, Copy, Debug)]
pub struct ParamDef {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn p(key: &'static str, default: &'static str, help: &'static str) -> ParamDef {
    ParamDef { key, default, help }
}

pub type Metrics = Vec<(&'static str, f64)>;

pub struct ExperimentDef {
    pub id: ExperimentId,
    pub summary: &'static str,
    pub params: &'static [ParamDef],
    pub default_replications: usize,
    /// Axis whose levels are compared within a replication; drives the
    /// matched-comparison standard error.
    pub matched_axis: Option<&'static str>,
    /// Parses a condition without running anything.
    pub check: fn(&Condition) -> Result<()>,
    pub run: fn(&Condition, u64) -> Result<Metrics>,
}

pub struct Registry([ExperimentDef; 7]);

impl Registry {
    pub fn iter(&self) -> impl Iterator<Item = &ExperimentDef> {
        self.0.iter()
    }
}

impl std::ops::Index<ExperimentId> for Registry {
    type Output = ExperimentDef;

    fn index(&self, id: ExperimentId) -> &ExperimentDef {
        self.0.iter().find(|d| d.id == id).expect("every id is registered")
    }
}

pub static EXPERIMENTS: Registry = Registry([
    ExperimentDef {
        id: ExperimentId::Capacity,
        summary: "standalone attractor nets: noise suppression vs stored attractors A, units n, training noise",
        params: capacity::PARAMS,
        default_replications: 10,
        matched_axis: None,
        check: capacity::check,
        run: capacity::run,
    },
    ExperimentDef {
        id: ExperimentId::Parity,
        summary: "streamed 10-bit parity: RNN, RNN+ and SDRNN on novel and noisy sequences, hidden-state entropy",
        params: recurrent::PARITY_PARAMS,
        default_replications: 25,
        matched_axis: Some("model"),
        check: recurrent::check_parity,
        run: recurrent::run_parity,
    },
    ExperimentDef {
        id: ExperimentId::Majority,
        summary: "majority of l bits for several lengths l",
        params: recurrent::MAJORITY_PARAMS,
        default_replications: 25,
        matched_axis: Some("model"),
        check: recurrent::check_majority,
        run: recurrent::run_majority,
    },
    ExperimentDef {
        id: ExperimentId::Reber,
        summary: "Reber grammar membership vs training set size",
        params: recurrent::REBER_PARAMS,
        default_replications: 10,
        matched_axis: Some("model"),
        check: recurrent::check_reber,
        run: recurrent::run_reber,
    },
    ExperimentDef {
        id: ExperimentId::Symmetry,
        summary: "palindrome detection around a filler block of length f",
        params: recurrent::SYMMETRY_PARAMS,
        default_replications: 10,
        matched_axis: Some("model"),
        check: recurrent::check_symmetry,
        run: recurrent::run_symmetry,
    },
    ExperimentDef {
        id: ExperimentId::Adversarial,
        summary: "adversarially trained MLPs on 2-D blobs, with and without DAE reification; PGD/BPDA/noiseless attacks",
        params: adversarial::PARAMS,
        default_replications: 10,
        matched_axis: Some("model"),
        check: adversarial::check,
        run: adversarial::run,
    },
    ExperimentDef {
        id: ExperimentId::ScoreCheck,
        summary: "DAE on 1-D standard normal samples: reconstruction displacement vs the analytic score -x",
        params: score::PARAMS,
        default_replications: 5,
        matched_axis: None,
        check: score::check,
        run: score::run,
    },
]);

/// Checks that a value is one of `allowed`.
fn one_of<'a>(c: &'a Condition, key: &str, allowed: &[&str]) -> Result<&'a str> {
    let v = c.str(key)?;
    if allowed.contains(&v) {
        Ok(v)
    } else {
        Err(crate::Error::Spec(format!(
            "parameter '{key}' must be one of {}, got '{v}'",
            allowed.join("|")
        )))
    }
}

fn positive(c: &Condition, key: &str) -> Result<f64> {
    let v = c.f64(key)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(crate::Error::Spec(format!("parameter '{key}' must be > 0, got {v}")))
    }
}

fn at_least(c: &Condition, key: &str, min: usize) -> Result<usize> {
    let v = c.usize(key)?;
    if v >= min {
        Ok(v)
    } else {
        Err(crate::Error::Spec(format!("parameter '{key}' must be >= {min}, got {v}")))
    }
}
