//! Training an attractor net on its own denoising task, and fitting a DAE to
//! a fixed sample.

use rand::seq::SliceRandom;

use super::adam::{AdamState, Method};
use crate::attractor::{
    graph_denoise_loss, graph_ridge, make_denoising_batch, AttractorConfig, AttractorNet, AttractorTargets,
    DenoisingBatch,
};
use crate::dae::{corrupt_tensor, graph_rec_loss, Dae};
use crate::params::Parameterized;
use crate::rnn::slice_rows;
use crate::{derive_seed, rng_from_seed, Error, Graph, Result, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct StandaloneConfig {
    /// Dynamics and the training noise `sigma`.
    pub attractor: AttractorConfig,
    /// Attractor units.
    pub n: usize,
    pub sigma_test: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub method: Method,
}

impl Default for StandaloneConfig {
    fn default() -> Self {
        Self {
            attractor: AttractorConfig::default(),
            n: 100,
            sigma_test: 0.25,
            epochs: 30,
            batch_size: 64,
            lr: 0.01,
            method: Method::Adam,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StandaloneOutcome {
    pub net: AttractorNet,
    /// `100 (1 − L)` on the test batch.
    pub suppression: f64,
    pub test_loss: f64,
    /// Mean minibatch loss per epoch.
    pub history: Vec<f64>,
    pub test: DenoisingBatch,
}

/// Percentage of noise variance removed on `batch`.
pub fn suppression(net: &AttractorNet, batch: &DenoisingBatch, cfg: &AttractorConfig) -> Result<f64> {
    let (loss, _) = net.denoising_loss(batch, cfg)?;
    Ok(100.0 * (1.0 - loss))
}

fn take_rows(t: &Tensor, idx: &[usize]) -> Tensor {
    let c = t.cols();
    let mut data = Vec::with_capacity(idx.len() * c);
    for &i in idx {
        data.extend_from_slice(t.row(i));
    }
    Tensor::matrix(idx.len(), c, data)
}

/// Minibatch training on `κ·A` noisy instances at `cfg.attractor.sigma`,
/// scored on a test batch drawn once at `cfg.sigma_test`.
pub fn train_attractor_standalone(
    targets: &AttractorTargets,
    cfg: &StandaloneConfig,
    seed: u64,
) -> Result<StandaloneOutcome> {
    cfg.attractor.validate()?;
    if !(cfg.attractor.sigma > 0.0) || !(cfg.sigma_test >= 0.0) {
        return Err(Error::Config("training sigma must be > 0 and test sigma >= 0".into()));
    }
    if cfg.batch_size == 0 || cfg.n == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config("batch_size, n and lr must be positive".into()));
    }
    let mut net = AttractorNet::init(targets.dim(), cfg.n, derive_seed(seed, 0));
    let train = make_denoising_batch(targets, cfg.attractor.sigma, derive_seed(seed, 1))?;
    let test = make_denoising_batch(targets, cfg.sigma_test, derive_seed(seed, 2))?;
    let mut opt = AdamState::with_method(cfg.lr, cfg.method, &net.params());
    let mut rng = rng_from_seed(derive_seed(seed, 3));
    let mut order: Vec<usize> = (0..train.xi.rows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch = DenoisingBatch {
                x_hat: take_rows(&train.x_hat, idx),
                xi: take_rows(&train.xi, idx),
            };
            let mut g = Graph::new();
            let vars = net.register(&mut g, true);
            let (mut loss, _) = graph_denoise_loss(&mut g, &vars, &batch, &cfg.attractor)?;
            if cfg.attractor.ridge_lambda > 0.0 {
                let r = graph_ridge(&mut g, &vars, cfg.attractor.ridge_lambda)?;
                loss = g.add(loss, r)?;
            }
            let value = g.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what: "attractor denoising loss".into(),
                    epoch,
                });
            }
            total += value * idx.len() as f64;
            g.backward(loss)?;
            let grads: Vec<Tensor> = vars
                .all()
                .iter()
                .map(|v| g.grad(*v).cloned().expect("tracked parameter"))
                .collect();
            let refs: Vec<&Tensor> = grads.iter().collect();
            opt.step(&mut net.params_mut(), &refs)?;
            if cfg.attractor.clamp_diagonal {
                net.clamp_diagonal();
            }
        }
        history.push(total / order.len() as f64);
    }
    let (test_loss, _) = net.denoising_loss(&test, &cfg.attractor)?;
    Ok(StandaloneOutcome {
        net,
        suppression: 100.0 * (1.0 - test_loss),
        test_loss,
        history,
        test,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DaeTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for DaeTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            lr: 0.01,
        }
    }
}

/// Fits `dae` to rows of `data` with fresh corruption each epoch; returns the
/// mean loss per epoch.
pub fn train_dae(dae: &mut Dae, data: &Tensor, cfg: &DaeTrainConfig, seed: u64) -> Result<Vec<f64>> {
    if data.rows() == 0 {
        return Err(Error::Empty("DAE training data"));
    }
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config("batch_size and lr must be positive".into()));
    }
    let mut opt = AdamState::new(cfg.lr, &dae.params());
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let mut order: Vec<usize> = (0..data.rows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let shuffled = take_rows(data, &order);
        let noisy_all = corrupt_tensor(&shuffled, dae.sigma, derive_seed(seed, 1 + epoch as u64));
        let mut total = 0.0;
        let mut start = 0;
        while start < order.len() {
            let end = (start + cfg.batch_size).min(order.len());
            let mut g = Graph::new();
            let vars = dae.register(&mut g, true);
            let nv = g.constant(slice_rows(&noisy_all, start, end));
            let tv = g.constant(slice_rows(&shuffled, start, end));
            let loss = graph_rec_loss(&mut g, &vars, nv, tv)?;
            let value = g.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what: "DAE loss".into(),
                    epoch,
                });
            }
            total += value * (end - start) as f64;
            g.backward(loss)?;
            let grads: Vec<Tensor> = [vars.w_enc, vars.b_enc, vars.w_dec, vars.b_dec]
                .iter()
                .map(|v| g.grad(*v).cloned().expect("tracked parameter"))
                .collect();
            let refs: Vec<&Tensor> = grads.iter().collect();
            opt.step(&mut dae.params_mut(), &refs)?;
            start = end;
        }
        history.push(total / order.len() as f64);
    }
    Ok(history)
}
