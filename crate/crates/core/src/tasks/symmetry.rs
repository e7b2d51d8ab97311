//! Symmetry detection on strings `S_1..S_s ∅^f S_s..S_1`.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::{one_hot, Dataset, DatasetMeta, Split};
use crate::{derive_seed, rng_from_seed, Error, Result, SeededRng};

pub const LETTERS: usize = 8;
pub const FILLER: char = '_';
pub const SYMMETRY_ALPHABET: [char; 9] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', FILLER];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryKind {
    Positive,
    Exchange,
    Substitution,
}

/// `Some(true)` if `tokens` (indices into the alphabet) has the symmetric
/// shape for `(s, f)`, `Some(false)` for any other string of the right
/// length, `None` if the length is wrong.
pub fn symmetry_label(tokens: &[usize], s: usize, f: usize) -> Option<bool> {
    if tokens.len() != 2 * s + f {
        return None;
    }
    let filler = LETTERS;
    let halves_ok = (0..s).all(|i| {
        let (a, b) = (tokens[i], tokens[2 * s + f - 1 - i]);
        a < LETTERS && a == b
    });
    let middle_ok = tokens[s..s + f].iter().all(|&t| t == filler);
    Some(halves_ok && middle_ok)
}

fn positive(rng: &mut SeededRng, s: usize, f: usize) -> Vec<usize> {
    let half: Vec<usize> = (0..s).map(|_| rng.random_range(0..LETTERS)).collect();
    let mut out = half.clone();
    out.extend(std::iter::repeat_n(LETTERS, f));
    out.extend(half.iter().rev());
    out
}

/// Swaps two adjacent distinct letters; `None` if the string has no such pair.
fn exchange(tokens: &[usize], rng: &mut SeededRng) -> Option<Vec<usize>> {
    let pairs: Vec<usize> = (0..tokens.len() - 1)
        .filter(|&i| {
            let (a, b) = (tokens[i], tokens[i + 1]);
            a < LETTERS && b < LETTERS && a != b
        })
        .collect();
    let &i = pairs.choose(rng)?;
    let mut out = tokens.to_vec();
    out.swap(i, i + 1);
    Some(out)
}

fn substitution(tokens: &[usize], rng: &mut SeededRng) -> Vec<usize> {
    let letters: Vec<usize> = (0..tokens.len()).filter(|&i| tokens[i] < LETTERS).collect();
    let &i = letters.choose(rng).expect("at least one letter");
    let mut out = tokens.to_vec();
    let mut repl = rng.random_range(0..LETTERS - 1);
    if repl >= tokens[i] {
        repl += 1;
    }
    out[i] = repl;
    out
}

fn gen_set(n: usize, s: usize, f: usize, seed: u64) -> Vec<(Vec<usize>, SymmetryKind)> {
    let mut rng = rng_from_seed(seed);
    let n_pos = n / 2;
    let n_neg = n - n_pos;
    let n_exchange = n_neg / 2;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n_pos {
        out.push((positive(&mut rng, s, f), SymmetryKind::Positive));
    }
    while out.len() < n_pos + n_exchange {
        let p = positive(&mut rng, s, f);
        if let Some(x) = exchange(&p, &mut rng) {
            out.push((x, SymmetryKind::Exchange));
        }
    }
    while out.len() < n {
        let p = positive(&mut rng, s, f);
        out.push((substitution(&p, &mut rng), SymmetryKind::Substitution));
    }
    out.shuffle(&mut rng);
    out
}

fn encode(set: &[(Vec<usize>, SymmetryKind)], meta: DatasetMeta) -> Dataset {
    Dataset {
        inputs: set
            .iter()
            .map(|(t, _)| t.iter().map(|&i| one_hot(i, SYMMETRY_ALPHABET.len())).collect())
            .collect(),
        targets: set
            .iter()
            .map(|(_, k)| if *k == SymmetryKind::Positive { 1.0 } else { 0.0 })
            .collect(),
        alphabet: Some(SYMMETRY_ALPHABET.to_vec()),
        meta,
    }
}

/// Balanced sets; negatives split equally between adjacent exchanges and
/// single-letter substitutions.
pub fn gen_symmetry(s: usize, f: usize, n_train: usize, n_test: usize, seed: u64) -> Result<Split> {
    if s < 2 {
        return Err(Error::Config(format!("symmetry half length must be >= 2, got {s}")));
    }
    let meta = |part: &str| {
        DatasetMeta::new(
            "symmetry",
            &[("part", part.into()), ("s", s.to_string()), ("f", f.to_string())],
            seed,
        )
    };
    Ok(Split {
        train: encode(&gen_set(n_train, s, f, derive_seed(seed, 0)), meta("train")),
        test: encode(&gen_set(n_test, s, f, derive_seed(seed, 1)), meta("test")),
    })
}
