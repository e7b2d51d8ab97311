//! The Reber grammar: a seven-state acceptor, a sampler with uniform
//! transition choices, and single-substitution negatives.

use rand::Rng;
use rand::seq::{IndexedRandom, SliceRandom};

use super::{one_hot, Dataset, DatasetMeta, Split};
use crate::{derive_seed, rng_from_seed};

pub const REBER_ALPHABET: [char; 7] = ['B', 'T', 'S', 'X', 'P', 'V', 'E'];
/// Strings longer than this are resampled; shorter ones are left-padded with `B`.
pub const REBER_MAX_LEN: usize = 20;

/// Transition table: `transitions[state]` lists `(symbol, next)`.
/// State 0 is the start, `accept` is reached after `E`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReberFsm {
    pub transitions: Vec<Vec<(char, usize)>>,
    pub accept: usize,
}

impl Default for ReberFsm {
    fn default() -> Self {
        Self {
            transitions: vec![
                vec![('B', 1)],
                vec![('T', 2), ('P', 3)],
                vec![('S', 2), ('X', 4)],
                vec![('T', 3), ('V', 5)],
                vec![('X', 3), ('S', 6)],
                vec![('P', 4), ('V', 6)],
                vec![('E', 7)],
                vec![],
            ],
            accept: 7,
        }
    }
}

impl ReberFsm {
    pub fn next(&self, state: usize, symbol: char) -> Option<usize> {
        self.transitions
            .get(state)?
            .iter()
            .find(|(s, _)| *s == symbol)
            .map(|&(_, n)| n)
    }
}

pub fn reber_accepts(fsm: &ReberFsm, string: &str) -> bool {
    let mut state = 0;
    for c in string.chars() {
        match fsm.next(state, c) {
            Some(n) => state = n,
            None => return false,
        }
    }
    state == fsm.accept
}

/// One walk from start to accept with uniform choices at every branch.
pub fn reber_sample<R: Rng + ?Sized>(fsm: &ReberFsm, rng: &mut R) -> String {
    let mut state = 0;
    let mut out = String::new();
    while state != fsm.accept {
        let options = &fsm.transitions[state];
        let (c, n) = options[rng.random_range(0..options.len())];
        out.push(c);
        state = n;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReberString {
    pub text: String,
    pub positive: bool,
    /// The grammatical string a negative was derived from.
    pub source: Option<String>,
}

fn sample_bounded<R: Rng + ?Sized>(fsm: &ReberFsm, rng: &mut R) -> String {
    loop {
        let s = reber_sample(fsm, rng);
        if s.len() <= REBER_MAX_LEN {
            return s;
        }
    }
}

fn substitute<R: Rng + ?Sized>(fsm: &ReberFsm, positive: &str, rng: &mut R) -> String {
    let chars: Vec<char> = positive.chars().collect();
    loop {
        let pos = rng.random_range(0..chars.len());
        let others: Vec<char> = REBER_ALPHABET.iter().copied().filter(|&c| c != chars[pos]).collect();
        let mut cand = chars.clone();
        cand[pos] = *others.choose(rng).expect("six alternatives");
        let s: String = cand.into_iter().collect();
        if !reber_accepts(fsm, &s) {
            return s;
        }
    }
}

/// `n / 2` positives and `n - n / 2` negatives, shuffled.
pub fn gen_reber_strings(n: usize, seed: u64) -> Vec<ReberString> {
    let fsm = ReberFsm::default();
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n / 2 {
        out.push(ReberString {
            text: sample_bounded(&fsm, &mut rng),
            positive: true,
            source: None,
        });
    }
    for _ in n / 2..n {
        let src = sample_bounded(&fsm, &mut rng);
        out.push(ReberString {
            text: substitute(&fsm, &src, &mut rng),
            positive: false,
            source: Some(src),
        });
    }
    out.shuffle(&mut rng);
    out
}

fn encode(strings: &[ReberString], meta: DatasetMeta) -> Dataset {
    let inputs = strings
        .iter()
        .map(|s| {
            let pad = REBER_MAX_LEN - s.text.len();
            std::iter::repeat_n('B', pad)
                .chain(s.text.chars())
                .map(|c| {
                    let i = REBER_ALPHABET.iter().position(|&a| a == c).expect("alphabet symbol");
                    one_hot(i, REBER_ALPHABET.len())
                })
                .collect()
        })
        .collect();
    Dataset {
        inputs,
        targets: strings.iter().map(|s| if s.positive { 1.0 } else { 0.0 }).collect(),
        alphabet: Some(REBER_ALPHABET.to_vec()),
        meta,
    }
}

/// Balanced train and test sets of one-hot strings left-padded to 20.
pub fn gen_reber(n_train: usize, n_test: usize, seed: u64) -> Split {
    let meta = |part: &str, n: usize| {
        DatasetMeta::new("reber", &[("part", part.into()), ("n", n.to_string())], seed)
    };
    Split {
        train: encode(&gen_reber_strings(n_train, derive_seed(seed, 0)), meta("train", n_train)),
        test: encode(&gen_reber_strings(n_test, derive_seed(seed, 1)), meta("test", n_test)),
    }
}
