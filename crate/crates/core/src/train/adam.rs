//! ADAM with bias correction, plus a plain SGD fallback.

use crate::{Error, NdError, Result, Tensor};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Adam,
    Sgd,
}

/// Moments for a fixed list of parameters. Each parameter keeps its own step
/// count so that masked updates (see [`AdamState::step_masked`]) stay
/// correctly bias-corrected.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub method: Method,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: Vec<u64>,
}

impl AdamState {
    pub fn new(lr: f64, params: &[&Tensor]) -> Self {
        Self::with_method(lr, Method::Adam, params)
    }

    pub fn with_method(lr: f64, method: Method, params: &[&Tensor]) -> Self {
        Self {
            lr,
            method,
            beta1: BETA1,
            beta2: BETA2,
            eps: ADAM_EPS,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            t: vec![0; params.len()],
        }
    }

    /// Largest per-parameter step count.
    pub fn steps(&self) -> u64 {
        self.t.iter().copied().max().unwrap_or(0)
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        let masked: Vec<Option<&Tensor>> = grads.iter().map(|g| Some(*g)).collect();
        self.step_masked(params, &masked)
    }

    /// Updates only parameters whose gradient is `Some`; the others keep
    /// their values and moments.
    pub fn step_masked(&mut self, params: &mut [&mut Tensor], grads: &[Option<&Tensor>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Config(format!(
                "optimizer holds {} parameters, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let Some(g) = g else { continue };
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(NdError::ShapeMismatch {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                }
                .into());
            }
            if !g.all_finite() {
                return Err(Error::Domain(format!("non-finite gradient for parameter {i}")));
            }
            match self.method {
                Method::Sgd => {
                    for (w, dw) in p.data_mut().iter_mut().zip(g.data()) {
                        *w -= self.lr * dw;
                    }
                }
                Method::Adam => {
                    self.t[i] += 1;
                    let t = self.t[i] as i32;
                    let c1 = 1.0 - self.beta1.powi(t);
                    let c2 = 1.0 - self.beta2.powi(t);
                    let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
                    let m = self.m[i].data_mut();
                    let v = self.v[i].data_mut();
                    for (((w, &dw), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                        *m = b1 * *m + (1.0 - b1) * dw;
                        *v = b2 * *v + (1.0 - b2) * dw * dw;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

/// One optimizer step; a thin wrapper for call sites that prefer a function.
pub fn adam_step(state: &mut AdamState, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
    state.step(params, grads)
}
