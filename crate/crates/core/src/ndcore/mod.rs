//! Dense tensors, a reverse-mode tape, and finite-difference gradient checks.
//!
//! Everything is `f64`. Tensors are rank 1 or 2; the only broadcast is a bias
//! row added to every row of a matrix. Model code registers its parameters on
//! a fresh [`Graph`] per forward pass and reads gradients back off the leaves.

mod gradcheck;
mod graph;
pub(crate) mod kernels;
mod tensor;

use thiserror::Error;

pub use gradcheck::{grad_check, grad_check_many, GradCheckReport};
pub use graph::{sigmoid, tanh, Graph, Var, ATANH_GUARD};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NdError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("shape {shape:?} cannot hold {len} elements")]
    BadShape { shape: Vec<usize>, len: usize },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("{0}")]
    Domain(String),
}
