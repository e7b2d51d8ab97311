//! State reification: attractor networks and denoising autoencoders that pull
//! hidden states back toward the states seen during training.
//!
//! - [`ndcore`]: tensors, reverse-mode tape, gradient checks
//! - [`attractor`]: symmetric-weight attractor net, denoising loss, convergence
//! - [`dae`]: denoising autoencoder reifier and its score estimate
//! - [`rnn`]: tanh/GRU cells and the reified recurrent model
//! - [`tasks`]: seeded generators for parity, majority, Reber, symmetry, blobs
//! - [`train`]: ADAM, dual-loss routing, standalone attractor training
//! - [`adversarial`]: PGD/BPDA attacks and adversarial training of reified MLPs

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod attractor;
pub mod dae;
pub mod ndcore;
pub mod params;
pub mod rnn;
pub mod tasks;
pub mod train;

use rand::SeedableRng;
use thiserror::Error;

pub use ndcore::{Graph, NdError, Tensor, Var};

/// Deterministic generator used everywhere a seed is accepted.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Derives an independent stream seed from `(seed, stream)` (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Nd(#[from] NdError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model has no reifier")]
    MissingReifier,
    #[error("non-finite {what} at epoch {epoch}")]
    NonFinite { what: String, epoch: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("parameter file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
