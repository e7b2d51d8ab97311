//! Seeded generators for the symbolic datasets and synthetic targets.
//!
//! Every generator is a pure function of its arguments and seed.

mod binary;
mod reber;
mod symmetry;
mod synthetic;

use std::io::Write;

pub use binary::{gen_majority, gen_parity, majority_target, parity_target, BinarySplit};
pub use reber::{
    gen_reber, gen_reber_strings, reber_accepts, reber_sample, ReberFsm, ReberString, REBER_ALPHABET,
    REBER_MAX_LEN,
};
pub use symmetry::{gen_symmetry, symmetry_label, SymmetryKind, FILLER, SYMMETRY_ALPHABET};
pub use synthetic::{gen_attractor_targets, gen_blobs, BLOB_STD};

use crate::{Error, Result, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub task: String,
    pub params: Vec<(String, String)>,
    pub seed: u64,
}

/// Fixed-length sequences of input vectors with {0,1} targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<Vec<f64>>>,
    pub targets: Vec<f64>,
    /// Symbol names for one-hot inputs; `None` for real-valued inputs.
    pub alphabet: Option<Vec<char>>,
    pub meta: DatasetMeta,
}

/// A train set with one held-out test set.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

impl DatasetMeta {
    pub fn new(task: &str, params: &[(&str, String)], seed: u64) -> Self {
        Self {
            task: task.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            seed,
        }
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn seq_len(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn input_dim(&self) -> usize {
        self.inputs
            .first()
            .and_then(|s| s.first())
            .map_or(0, Vec::len)
    }

    pub fn positives(&self) -> usize {
        self.targets.iter().filter(|&&t| t == 1.0).count()
    }

    /// Time-major batch for the rows in `idx`: `out[t]` is `[idx.len(), i]`.
    pub fn steps(&self, idx: &[usize]) -> Result<Vec<Tensor>> {
        let len = self.seq_len();
        let dim = self.input_dim();
        if idx.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut out = Vec::with_capacity(len);
        for t in 0..len {
            let mut data = Vec::with_capacity(idx.len() * dim);
            for &i in idx {
                let seq = &self.inputs[i];
                if seq.len() != len || seq[t].len() != dim {
                    return Err(Error::Format(format!("example {i} has a ragged shape")));
                }
                data.extend_from_slice(&seq[t]);
            }
            out.push(Tensor::matrix(idx.len(), dim, data));
        }
        Ok(out)
    }

    pub fn all_steps(&self) -> Result<Vec<Tensor>> {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.steps(&idx)
    }

    /// Targets for `idx` as an `[idx.len(), 1]` column.
    pub fn target_column(&self, idx: &[usize]) -> Tensor {
        Tensor::matrix(idx.len(), 1, idx.iter().map(|&i| self.targets[i]).collect())
    }

    /// Writes one line per example: `target<TAB>tokens`.
    ///
    /// One-hot steps print as their symbol with no separator; real-valued
    /// steps print as comma-joined numbers separated by spaces.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# {} seed={} {}",
            self.meta.task,
            self.meta.seed,
            self.meta
                .params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ")
        )?;
        for (seq, target) in self.inputs.iter().zip(&self.targets) {
            let body = match &self.alphabet {
                Some(alpha) => seq
                    .iter()
                    .map(|v| one_hot_index(v).map_or('?', |i| alpha[i]))
                    .collect::<String>(),
                None => seq
                    .iter()
                    .map(|v| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(","))
                    .collect::<Vec<_>>()
                    .join(" "),
            };
            writeln!(out, "{target}\t{body}")?;
        }
        Ok(())
    }
}

pub(crate) fn one_hot(index: usize, width: usize) -> Vec<f64> {
    let mut v = vec![0.0; width];
    v[index] = 1.0;
    v
}

fn one_hot_index(v: &[f64]) -> Option<usize> {
    let mut hit = None;
    for (i, &x) in v.iter().enumerate() {
        if x == 1.0 && hit.is_none() {
            hit = Some(i);
        } else if x != 0.0 {
            return None;
        }
    }
    hit
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset {
            inputs: vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            ],
            targets: vec![1.0, 0.0],
            alphabet: Some(vec!['a', 'b']),
            meta: DatasetMeta::new("tiny", &[("k", "1".into())], 4),
        }
    }

    #[test]
    fn steps_are_time_major() {
        let d = tiny();
        let s = d.steps(&[1, 0]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].data(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(d.target_column(&[1, 0]).data(), &[0.0, 1.0]);
        assert!(d.steps(&[]).is_err());
    }

    #[test]
    fn text_export() {
        let mut buf = Vec::new();
        tiny().write_text(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# tiny seed=4 k=1\n1\tab\n0\tbb\n"
        );
    }

    #[test]
    fn real_valued_text_export() {
        let mut d = tiny();
        d.alphabet = None;
        d.inputs = vec![vec![vec![0.5], vec![1.0]]];
        d.targets = vec![1.0];
        let mut buf = Vec::new();
        d.write_text(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("1\t0.5 1\n"));
    }
}
