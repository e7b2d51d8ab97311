//! Parity, majority, Reber and symmetry: one recurrent model per cell,
//! trained with the task's schedule and scored from its best checkpoint.

use reify_core::attractor::{AttractorConfig, Variant};
use reify_core::derive_seed;
use reify_core::rnn::{hidden_entropy, CellKind, SdrnnModel};
use reify_core::tasks::{gen_majority, gen_parity, gen_reber, gen_symmetry, Dataset};
use reify_core::train::{model_accuracy, train_sdrnn, BatchMode, LossRouting, TrainSchedule};

use super::{at_least, one_of, p, positive, Metrics, ParamDef};
use crate::spec::Condition;
use crate::{Error, Result};

/// The three compared architectures. RNN+ carries the attractor but never
/// receives the denoising loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Rnn,
    RnnPlus,
    Sdrnn,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rnn" => Ok(ModelKind::Rnn),
            "rnn_plus" => Ok(ModelKind::RnnPlus),
            "sdrnn" => Ok(ModelKind::Sdrnn),
            _ => Err(Error::Spec(format!("model must be rnn|rnn_plus|sdrnn, got '{s}'"))),
        }
    }
}

pub(super) const PARITY_PARAMS: &[ParamDef] = &[
    p("model", "rnn,rnn_plus,sdrnn", "rnn | rnn_plus | sdrnn"),
    p("cell", "tanh", "tanh | gru"),
    p("hidden", "10", "recurrent units"),
    p("attractor_n", "20", "attractor units"),
    p("sigma", "0.5", "attractor training noise"),
    p("iterations", "15", "attractor iterations per step"),
    p("lr", "0.008", "ADAM learning rate for both losses"),
    p("epochs", "5000", "epoch cap"),
    p("routing", "attractor_only", "attractor_only | joint"),
    p("batch", "full", "full, or a minibatch size"),
    p("ridge", "0", "weight decay on the attractor W"),
    p("denoise_start", "0", "first epoch with the denoising loss"),
];

pub(super) const MAJORITY_PARAMS: &[ParamDef] = &[
    p("l", "11,17,23,29,35", "sequence length (odd)"),
    p("model", "rnn,rnn_plus,sdrnn", "rnn | rnn_plus | sdrnn"),
    p("cell", "tanh", "tanh | gru"),
    p("hidden", "10", "recurrent units"),
    p("attractor_n", "20", "attractor units"),
    p("sigma", "0.25", "attractor training noise"),
    p("iterations", "5", "attractor iterations per step"),
    p("lr", "0.008", "ADAM learning rate for both losses"),
    p("epochs", "2500", "epoch cap"),
    p("routing", "joint", "attractor_only | joint"),
    p("batch", "full", "full, or a minibatch size"),
    p("ridge", "0", "weight decay on the attractor W"),
    p("denoise_start", "0", "first epoch with the denoising loss"),
];

pub(super) const REBER_PARAMS: &[ParamDef] = &[
    p("n_train", "50,100,200,400,800", "training strings"),
    p("n_test", "2000", "test strings"),
    p("model", "rnn,rnn_plus,sdrnn", "rnn | rnn_plus | sdrnn"),
    p("cell", "tanh", "tanh | gru"),
    p("hidden", "20", "recurrent units"),
    p("attractor_n", "40", "attractor units"),
    p("sigma", "0.25", "attractor training noise"),
    p("iterations", "5", "attractor iterations per step"),
    p("lr", "0.008", "ADAM learning rate for both losses"),
    p("epochs", "2500", "epoch cap"),
    p("routing", "joint", "attractor_only | joint"),
    p("batch", "full", "full, or a minibatch size"),
    p("ridge", "0", "weight decay on the attractor W"),
    p("denoise_start", "100", "first epoch with the denoising loss"),
];

pub(super) const SYMMETRY_PARAMS: &[ParamDef] = &[
    p("f", "1,10", "filler length"),
    p("s", "5", "symbols per half"),
    p("n_train", "5000", "training strings"),
    p("n_test", "2000", "test strings"),
    p("model", "rnn,rnn_plus,sdrnn", "rnn | rnn_plus | sdrnn"),
    p("cell", "tanh", "tanh | gru"),
    p("hidden", "20", "recurrent units"),
    p("attractor_n", "40", "attractor units"),
    p("sigma", "0.25", "attractor training noise"),
    p("iterations", "5", "attractor iterations per step"),
    p("lr", "auto", "ADAM learning rate for both losses; auto = 0.002 for f >= 10, else 0.003"),
    p("epochs", "200", "epoch cap"),
    p("routing", "joint", "attractor_only | joint"),
    p("batch", "100", "full, or a minibatch size"),
    p("ridge", "0", "weight decay on the attractor W"),
    p("denoise_start", "0", "first epoch with the denoising loss"),
];

struct Setup {
    model: ModelKind,
    cell: CellKind,
    hidden: usize,
    attractor_n: usize,
    attractor: AttractorConfig,
    schedule: TrainSchedule,
}

fn setup(c: &Condition, lr: f64) -> Result<Setup> {
    let model = ModelKind::parse(c.str("model")?)?;
    let cell = match one_of(c, "cell", &["tanh", "gru"])? {
        "tanh" => CellKind::Tanh,
        _ => CellKind::Gru,
    };
    let attractor = AttractorConfig {
        variant: Variant::ShiftedNonlinearity,
        sigma: positive(c, "sigma")?,
        ridge_lambda: c.f64("ridge")?,
        ..AttractorConfig::default()
    }
    .with_iterations(at_least(c, "iterations", 1)?);
    attractor.validate()?;
    let routing = match one_of(c, "routing", &["attractor_only", "joint"])? {
        "attractor_only" => LossRouting::AttractorOnlyDenoise,
        _ => LossRouting::JointDenoise,
    };
    let batch_mode = match c.str("batch")? {
        "full" => BatchMode::FullBatch,
        _ => BatchMode::MiniBatch(at_least(c, "batch", 1)?),
    };
    let schedule = TrainSchedule {
        lr_task: lr,
        lr_denoise: lr,
        max_epochs: c.usize("epochs")?,
        denoise_start_epoch: c.usize("denoise_start")?,
        denoise_weight: if model == ModelKind::Sdrnn { 1.0 } else { 0.0 },
        loss_routing: routing,
        stop_on_perfect_train: true,
        batch_mode,
    };
    schedule.validate()?;
    Ok(Setup {
        model,
        cell,
        hidden: at_least(c, "hidden", 1)?,
        attractor_n: at_least(c, "attractor_n", 1)?,
        attractor,
        schedule,
    })
}

/// Trains on `train` and reports accuracy on each named test set. Returns
/// the trained model for further probing.
fn fit(s: &Setup, train: &Dataset, tests: &[(&'static str, &Dataset)], seed: u64) -> Result<(SdrnnModel, Metrics)> {
    // Shared init: the cell and readout draw from the same stream for every
    // model kind; the attractor has its own.
    let init = derive_seed(seed, 21);
    let base = SdrnnModel::new(s.cell, train.input_dim(), s.hidden, 1, init);
    let mut model = match s.model {
        ModelKind::Rnn => base,
        ModelKind::RnnPlus | ModelKind::Sdrnn => base.with_attractor(s.attractor_n, s.attractor.clone(), init),
    };
    let out = train_sdrnn(&mut model, train, &s.schedule, derive_seed(seed, 22))?;
    let mut metrics: Metrics = vec![("train_acc", out.best.train_accuracy)];
    for (name, data) in tests {
        metrics.push((name, model_accuracy(&model, data)?));
    }
    metrics.push(("best_epoch", out.best.epoch as f64));
    metrics.push(("epochs_run", out.history.len() as f64));
    metrics.push(("perfect_train", f64::from(u8::from(out.best.train_accuracy >= 1.0))));
    Ok((model, metrics))
}

fn data_seed(seed: u64) -> u64 {
    derive_seed(seed, 20)
}

pub(super) fn check_parity(c: &Condition) -> Result<()> {
    setup(c, positive(c, "lr")?).map(|_| ())
}

pub(super) fn run_parity(c: &Condition, seed: u64) -> Result<Metrics> {
    let s = setup(c, positive(c, "lr")?)?;
    let data = gen_parity(data_seed(seed));
    let (model, mut metrics) = fit(&s, &data.train, &[("novel_acc", &data.novel), ("noisy_acc", &data.noisy)], seed)?;
    // Entropy of the states the recurrence carries forward, over every step
    // of the novel test sequences.
    let trace = model.run(&data.novel.all_steps()?)?;
    let h = hidden_entropy(&trace.reified)?;
    metrics.push(("entropy_nats", h.nats));
    metrics.push(("entropy_bits", h.bits));
    metrics.push(("distinct_states", h.distinct_states as f64));
    Ok(metrics)
}

pub(super) fn check_majority(c: &Condition) -> Result<()> {
    setup(c, positive(c, "lr")?)?;
    let l = c.usize("l")?;
    if l % 2 == 0 || l < 9 {
        return Err(Error::Spec(format!("l must be odd and >= 9, got {l}")));
    }
    Ok(())
}

pub(super) fn run_majority(c: &Condition, seed: u64) -> Result<Metrics> {
    let s = setup(c, positive(c, "lr")?)?;
    let data = gen_majority(c.usize("l")?, data_seed(seed))?;
    let (_, metrics) = fit(&s, &data.train, &[("novel_acc", &data.novel), ("noisy_acc", &data.noisy)], seed)?;
    Ok(metrics)
}

pub(super) fn check_reber(c: &Condition) -> Result<()> {
    setup(c, positive(c, "lr")?)?;
    at_least(c, "n_train", 2)?;
    at_least(c, "n_test", 2)?;
    Ok(())
}

pub(super) fn run_reber(c: &Condition, seed: u64) -> Result<Metrics> {
    let s = setup(c, positive(c, "lr")?)?;
    let split = gen_reber(c.usize("n_train")?, c.usize("n_test")?, data_seed(seed));
    let (_, mut metrics) = fit(&s, &split.train, &[("test_acc", &split.test)], seed)?;
    let acc = metrics.iter().find(|(k, _)| *k == "test_acc").map(|(_, v)| *v).unwrap_or(f64::NAN);
    metrics.push(("test_error", 1.0 - acc));
    Ok(metrics)
}

fn symmetry_lr(c: &Condition) -> Result<f64> {
    match c.str("lr")? {
        "auto" => Ok(TrainSchedule::symmetry(c.usize("f")?).lr_task),
        _ => positive(c, "lr"),
    }
}

pub(super) fn check_symmetry(c: &Condition) -> Result<()> {
    setup(c, symmetry_lr(c)?)?;
    at_least(c, "s", 2)?;
    at_least(c, "n_train", 4)?;
    at_least(c, "n_test", 4)?;
    Ok(())
}

pub(super) fn run_symmetry(c: &Condition, seed: u64) -> Result<Metrics> {
    let s = setup(c, symmetry_lr(c)?)?;
    let split = gen_symmetry(
        c.usize("s")?,
        c.usize("f")?,
        c.usize("n_train")?,
        c.usize("n_test")?,
        data_seed(seed),
    )?;
    let (_, mut metrics) = fit(&s, &split.train, &[("test_acc", &split.test)], seed)?;
    let acc = metrics.iter().find(|(k, _)| *k == "test_acc").map(|(_, v)| *v).unwrap_or(f64::NAN);
    metrics.push(("test_error", 1.0 - acc));
    Ok(metrics)
}
