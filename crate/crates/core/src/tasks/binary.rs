//! Streamed parity and majority over binary sequences.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::{Dataset, DatasetMeta};
use crate::{rng_from_seed, Error, Result, SeededRng};

pub const PARITY_LEN: usize = 10;
pub const PARITY_TRAIN: usize = 256;
pub const MAJORITY_TRAIN: usize = 100;
/// Half-width of the uniform input noise in the noisy test sets.
pub const INPUT_NOISE: f64 = 0.1;
/// Noisy copies of every training sequence.
pub const NOISY_COPIES: usize = 3;

/// Training set plus the two test sets: novel sequences and noisy copies of
/// the training sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct BinarySplit {
    pub train: Dataset,
    pub novel: Dataset,
    pub noisy: Dataset,
}

pub fn parity_target(bits: &[u8]) -> f64 {
    (bits.iter().filter(|&&b| b == 1).count() % 2) as f64
}

pub fn majority_target(bits: &[u8]) -> f64 {
    let ones = bits.iter().filter(|&&b| b == 1).count();
    if 2 * ones > bits.len() {
        1.0
    } else {
        0.0
    }
}

fn bits_of(code: u32, len: usize) -> Vec<u8> {
    (0..len).map(|i| ((code >> (len - 1 - i)) & 1) as u8).collect()
}

fn encode(bits: &[Vec<u8>], target: fn(&[u8]) -> f64, meta: DatasetMeta) -> Dataset {
    Dataset {
        inputs: bits
            .iter()
            .map(|b| b.iter().map(|&x| vec![x as f64]).collect())
            .collect(),
        targets: bits.iter().map(|b| target(b)).collect(),
        alphabet: None,
        meta,
    }
}

fn noisy_copies(bits: &[Vec<u8>], target: fn(&[u8]) -> f64, rng: &mut SeededRng, meta: DatasetMeta) -> Dataset {
    let noise = Uniform::new_inclusive(-INPUT_NOISE, INPUT_NOISE).expect("finite bounds");
    let mut inputs = Vec::with_capacity(bits.len() * NOISY_COPIES);
    let mut targets = Vec::with_capacity(bits.len() * NOISY_COPIES);
    for _ in 0..NOISY_COPIES {
        for b in bits {
            inputs.push(b.iter().map(|&x| vec![x as f64 + noise.sample(rng)]).collect());
            targets.push(target(b));
        }
    }
    Dataset {
        inputs,
        targets,
        alphabet: None,
        meta,
    }
}

/// All 1024 length-10 sequences, shuffled and split 256 train / 768 novel;
/// the noisy set holds three noisy copies of every training sequence.
pub fn gen_parity(seed: u64) -> BinarySplit {
    let mut rng = rng_from_seed(seed);
    let mut all: Vec<Vec<u8>> = (0..1u32 << PARITY_LEN).map(|c| bits_of(c, PARITY_LEN)).collect();
    all.shuffle(&mut rng);
    let novel = all.split_off(PARITY_TRAIN);
    let meta = |part: &str| DatasetMeta::new("parity", &[("part", part.into()), ("len", PARITY_LEN.to_string())], seed);
    BinarySplit {
        train: encode(&all, parity_target, meta("train")),
        noisy: noisy_copies(&all, parity_target, &mut rng, meta("noisy")),
        novel: encode(&novel, parity_target, meta("novel")),
    }
}

/// 100 distinct random training sequences of odd length `l`, 100 distinct
/// novel sequences disjoint from them, and three noisy copies of the
/// training set.
pub fn gen_majority(l: usize, seed: u64) -> Result<BinarySplit> {
    if l.is_multiple_of(2) || l == 0 {
        return Err(Error::Config(format!("majority length must be odd, got {l}")));
    }
    if l < 8 {
        // 2^l must leave room for 200 distinct sequences.
        return Err(Error::Config(format!("majority length {l} too short for 200 distinct sequences")));
    }
    let mut rng = rng_from_seed(seed);
    let mut seen = HashSet::new();
    let mut draw = |rng: &mut SeededRng, count: usize| {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let bits: Vec<u8> = (0..l).map(|_| rng.random_range(0..2u8)).collect();
            if seen.insert(bits.clone()) {
                out.push(bits);
            }
        }
        out
    };
    let train = draw(&mut rng, MAJORITY_TRAIN);
    let novel = draw(&mut rng, MAJORITY_TRAIN);
    let meta = |part: &str| DatasetMeta::new("majority", &[("part", part.into()), ("len", l.to_string())], seed);
    Ok(BinarySplit {
        train: encode(&train, majority_target, meta("train")),
        noisy: noisy_copies(&train, majority_target, &mut rng, meta("noisy")),
        novel: encode(&novel, majority_target, meta("novel")),
    })
}
