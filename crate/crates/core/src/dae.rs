//! Denoising autoencoder reifier: `r(x) = W_dec tanh(W_enc x + b_enc) + b_dec`.
//!
//! Trained on `‖r(x + a) − x‖²` with `a ~ N(0, σ² I)`; at small σ the
//! displacement `(r(x) − x)/σ²` estimates the score `∂ log p(x)/∂x`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::params::Parameterized;
use crate::{rng_from_seed, Error, Graph, Result, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct Dae {
    /// `[b, d]`
    pub w_enc: Tensor,
    /// `[b]`
    pub b_enc: Tensor,
    /// `[d, b]`
    pub w_dec: Tensor,
    /// `[d]`
    pub b_dec: Tensor,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct DaeVars {
    pub w_enc: Var,
    pub b_enc: Var,
    pub w_dec: Var,
    pub b_dec: Var,
}

impl Dae {
    /// Weights `~ N(0, 1/fan_in)`, zero biases.
    pub fn new(d: usize, b: usize, sigma: f64, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        Self::with_rng(d, b, sigma, &mut rng)
    }

    pub fn with_rng<R: Rng + ?Sized>(d: usize, b: usize, sigma: f64, rng: &mut R) -> Self {
        assert!(d >= 1 && b >= 1, "DAE dims must be >= 1");
        Self {
            w_enc: Tensor::randn(&[b, d], (1.0 / d as f64).sqrt(), rng),
            b_enc: Tensor::zeros(&[b]),
            w_dec: Tensor::randn(&[d, b], (1.0 / b as f64).sqrt(), rng),
            b_dec: Tensor::zeros(&[d]),
            sigma,
        }
    }

    /// `W_enc = W_dec = I`, zero biases, so `r(x) = tanh(x)`.
    pub fn identity_init(d: usize, sigma: f64) -> Self {
        Self {
            w_enc: Tensor::identity(d),
            b_enc: Tensor::zeros(&[d]),
            w_dec: Tensor::identity(d),
            b_dec: Tensor::zeros(&[d]),
            sigma,
        }
    }

    pub fn dim(&self) -> usize {
        self.w_enc.cols()
    }

    pub fn bottleneck(&self) -> usize {
        self.w_enc.rows()
    }

    /// Reconstruction of each row of `x` `[N, d]`, no corruption.
    pub fn reconstruct(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let vars = self.register(&mut g, false);
        let xv = g.constant(x.clone().reshape(&[x.rows(), x.cols()])?);
        let r = graph_reconstruct(&mut g, &vars, xv)?;
        Ok(g.value(r).clone())
    }

    /// Mean over rows of `‖r(x + a) − x‖²` with fresh noise from `seed`.
    pub fn rec_loss(&self, batch: &Tensor, seed: u64) -> Result<f64> {
        if batch.rows() == 0 || batch.is_empty() {
            return Err(Error::Empty("rec_loss batch"));
        }
        let noisy = corrupt_tensor(batch, self.sigma, seed);
        let r = self.reconstruct(&noisy)?;
        Ok(mean_row_sq_dist(&r, batch))
    }

    /// `(r(x) − x) / σ²`, evaluated without corruption.
    pub fn score_estimate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !(self.sigma > 0.0) {
            return Err(Error::Domain("score estimate needs sigma > 0".into()));
        }
        let t = Tensor::matrix(1, x.len(), x.to_vec());
        let r = self.reconstruct(&t)?;
        let s2 = self.sigma * self.sigma;
        Ok(r.data().iter().zip(x).map(|(r, x)| (r - x) / s2).collect())
    }

    /// Total noiseless reconstruction error on `shifted` over that on `clean`.
    pub fn reconstruction_ratio(&self, clean: &Tensor, shifted: &Tensor) -> Result<f64> {
        if clean.is_empty() || shifted.is_empty() {
            return Err(Error::Empty("reconstruction_ratio batch"));
        }
        let total = |x: &Tensor| -> Result<f64> {
            let r = self.reconstruct(x)?;
            Ok(mean_row_sq_dist(&r, x) * x.rows() as f64)
        };
        let clean_err = total(clean)?;
        if clean_err == 0.0 {
            return Err(Error::Domain("clean reconstruction error is zero".into()));
        }
        Ok(total(shifted)? / clean_err)
    }

    pub fn register(&self, g: &mut Graph, trainable: bool) -> DaeVars {
        let mut put = |t: &Tensor| {
            if trainable {
                g.param(t.clone())
            } else {
                g.constant(t.clone())
            }
        };
        DaeVars {
            w_enc: put(&self.w_enc),
            b_enc: put(&self.b_enc),
            w_dec: put(&self.w_dec),
            b_dec: put(&self.b_dec),
        }
    }
}

impl Parameterized for Dae {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("dae.w_enc".into(), &self.w_enc),
            ("dae.b_enc".into(), &self.b_enc),
            ("dae.w_dec".into(), &self.w_dec),
            ("dae.b_dec".into(), &self.b_dec),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_enc, &mut self.b_enc, &mut self.w_dec, &mut self.b_dec]
    }
}

/// `x + N(0, σ²)` elementwise.
pub fn corrupt(x: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    corrupt_with(x, sigma, &mut rng)
}

pub fn corrupt_with<R: Rng + ?Sized>(x: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma == 0.0 {
        return x.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma >= 0");
    x.iter().map(|v| v + normal.sample(rng)).collect()
}

pub fn corrupt_tensor(x: &Tensor, sigma: f64, seed: u64) -> Tensor {
    let data = corrupt(x.data(), sigma, seed);
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

fn mean_row_sq_dist(a: &Tensor, b: &Tensor) -> f64 {
    let rows = b.rows();
    let total: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    total / rows as f64
}

pub fn graph_reconstruct(g: &mut Graph, vars: &DaeVars, x: Var) -> Result<Var> {
    let enc = g.matmul_t(x, vars.w_enc)?;
    let enc = g.add_row(enc, vars.b_enc)?;
    let h = g.tanh(enc);
    let dec = g.matmul_t(h, vars.w_dec)?;
    Ok(g.add_row(dec, vars.b_dec)?)
}

/// `mean_rows ‖r(noisy) − target‖²`.
pub fn graph_rec_loss(g: &mut Graph, vars: &DaeVars, noisy: Var, target: Var) -> Result<Var> {
    let r = graph_reconstruct(g, vars, noisy)?;
    let diff = g.sub(r, target)?;
    let per_row = g.row_sq_norm(diff)?;
    Ok(g.mean(per_row))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_corruption_is_identity() {
        let x = vec![0.1, -2.0, 3.5];
        assert_eq!(corrupt(&x, 0.0, 1), x);
    }

    #[test]
    fn corruption_statistics_and_determinism() {
        let x = vec![0.0; 10_000];
        let y = corrupt(&x, 0.5, 4);
        assert_eq!(y, corrupt(&x, 0.5, 4));
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() - 1) as f64).sqrt();
        assert!((sd - 0.5).abs() < 0.015, "{sd}");
    }

    #[test]
    fn identity_dae_hand_value() {
        // r(x) = tanh(x); x = 0.3, noise fixed by seed
        let dae = Dae::identity_init(1, 0.2);
        let batch = Tensor::matrix(1, 1, vec![0.3]);
        let noisy = corrupt(&[0.3], 0.2, 17)[0];
        let expected = (noisy.tanh() - 0.3).powi(2);
        let got = dae.rec_loss(&batch, 17).unwrap();
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn rec_loss_is_mean_over_examples() {
        let dae = Dae::new(2, 3, 0.0, 5);
        let a = Tensor::matrix(1, 2, vec![0.2, -0.4]);
        let b = Tensor::matrix(1, 2, vec![1.0, 0.5]);
        let both = Tensor::matrix(2, 2, vec![0.2, -0.4, 1.0, 0.5]);
        let la = dae.rec_loss(&a, 0).unwrap();
        let lb = dae.rec_loss(&b, 0).unwrap();
        assert!((dae.rec_loss(&both, 0).unwrap() - 0.5 * (la + lb)).abs() < 1e-15);
    }

    #[test]
    fn exact_inverse_has_zero_loss() {
        // With one hidden unit in its linear-ish regime we cannot be exact, so
        // use a decoder that undoes tanh at a single point.
        let mut dae = Dae::identity_init(1, 0.0);
        let x = 0.4f64;
        dae.w_dec = Tensor::matrix(1, 1, vec![x / x.tanh()]);
        let loss = dae.rec_loss(&Tensor::matrix(1, 1, vec![x]), 0).unwrap();
        assert!(loss < 1e-30);
    }

    #[test]
    fn score_requires_positive_sigma() {
        let dae = Dae::identity_init(2, 0.0);
        assert!(dae.score_estimate(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn ratio_examples() {
        let dae = Dae::identity_init(1, 0.1);
        let clean = Tensor::matrix(1, 1, vec![0.5]);
        assert_eq!(dae.reconstruction_ratio(&clean, &clean).unwrap(), 1.0);
        let shifted = Tensor::matrix(1, 1, vec![2.0]);
        let expected = (2f64.tanh() - 2.0).powi(2) / (0.5f64.tanh() - 0.5).powi(2);
        let got = dae.reconstruction_ratio(&clean, &shifted).unwrap();
        assert!((got - expected).abs() < 1e-12);
        let zero = Tensor::matrix(1, 1, vec![0.0]);
        assert!(dae.reconstruction_ratio(&zero, &shifted).is_err());
    }
}
