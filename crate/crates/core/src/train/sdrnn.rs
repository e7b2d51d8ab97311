//! Task/denoise training loop for [`SdrnnModel`].

use std::io::Write;

use rand::seq::SliceRandom;

use super::adam::AdamState;
use crate::params::Parameterized;
use crate::rnn::{reify_denoise_loss, ParamGroup, Reifier, SdrnnModel};
use crate::tasks::Dataset;
use crate::{derive_seed, rng_from_seed, Error, Graph, Result, Tensor};

/// Which parameters the task loss may update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossRouting {
    /// Task loss skips the reifier; the reifier learns from the denoising loss only.
    AttractorOnlyDenoise,
    /// Task loss updates everything; the reifier also gets the denoising loss.
    JointDenoise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchMode {
    FullBatch,
    MiniBatch(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSchedule {
    pub lr_task: f64,
    pub lr_denoise: f64,
    pub max_epochs: usize,
    pub denoise_start_epoch: usize,
    /// Scale on the denoising gradient; 0 disables the denoising loss (RNN+).
    pub denoise_weight: f64,
    pub loss_routing: LossRouting,
    pub stop_on_perfect_train: bool,
    pub batch_mode: BatchMode,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            lr_task: 0.008,
            lr_denoise: 0.008,
            max_epochs: 2500,
            denoise_start_epoch: 0,
            denoise_weight: 1.0,
            loss_routing: LossRouting::JointDenoise,
            stop_on_perfect_train: true,
            batch_mode: BatchMode::FullBatch,
        }
    }
}

impl TrainSchedule {
    pub fn parity() -> Self {
        Self {
            max_epochs: 5000,
            loss_routing: LossRouting::AttractorOnlyDenoise,
            ..Self::default()
        }
    }

    pub fn majority() -> Self {
        Self::default()
    }

    pub fn reber() -> Self {
        Self {
            denoise_start_epoch: 100,
            ..Self::default()
        }
    }

    /// `.002` for the long filler, `.003` otherwise.
    pub fn symmetry(filler: usize) -> Self {
        let lr = if filler >= 10 { 0.002 } else { 0.003 };
        Self {
            lr_task: lr,
            lr_denoise: lr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_task > 0.0 && self.lr_denoise > 0.0) {
            return Err(Error::Config("learning rates must be > 0".into()));
        }
        if self.denoise_start_epoch > self.max_epochs {
            return Err(Error::Config(format!(
                "denoise_start_epoch {} exceeds max_epochs {}",
                self.denoise_start_epoch, self.max_epochs
            )));
        }
        if !(self.denoise_weight >= 0.0) {
            return Err(Error::Config("denoise_weight must be >= 0".into()));
        }
        if self.batch_mode == BatchMode::MiniBatch(0) {
            return Err(Error::Config("mini-batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Parameter snapshot with the train accuracy it achieved.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: Vec<Tensor>,
    pub train_accuracy: f64,
    pub epoch: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task_loss: f64,
    pub denoise_loss: Option<f64>,
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub history: Vec<EpochRecord>,
}

/// Fraction of predictions on the right side of 0.5; exactly 0.5 counts as wrong.
pub fn accuracy(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if predictions.len() != targets.len() {
        return Err(Error::Config(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let correct = predictions
        .iter()
        .zip(targets)
        .filter(|(&p, &t)| (t == 1.0 && p > 0.5) || (t == 0.0 && p < 0.5))
        .count();
    Ok(correct as f64 / targets.len() as f64)
}

/// Accuracy of `model` on `data`.
pub fn model_accuracy(model: &SdrnnModel, data: &Dataset) -> Result<f64> {
    let trace = model.run(&data.all_steps()?)?;
    accuracy(trace.predictions.data(), &data.targets)
}

fn check_dims(model: &SdrnnModel, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if data.input_dim() != model.cell.input() {
        return Err(Error::Config(format!(
            "dataset input width {} does not match cell input {}",
            data.input_dim(),
            model.cell.input()
        )));
    }
    model.validate()
}

fn keep_diagonal(model: &mut SdrnnModel) {
    if let Reifier::Attractor { net, cfg } = &mut model.reifier {
        if cfg.clamp_diagonal {
            net.clamp_diagonal();
        }
    }
}

/// Trains `model` in place and leaves it holding the best checkpoint's
/// parameters (highest train accuracy, earliest on ties).
///
/// Per batch: one forward pass, a task-loss step routed by
/// `schedule.loss_routing`, then (from `denoise_start_epoch` on, when the
/// model has a reifier and `denoise_weight > 0`) a denoising step on the
/// reifier alone, using the batch's hidden states as detached targets.
pub fn train_sdrnn(
    model: &mut SdrnnModel,
    data: &Dataset,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<TrainOutcome> {
    schedule.validate()?;
    check_dims(model, data)?;
    let groups = model.param_groups();
    let reifier_start = groups.iter().position(|g| *g == ParamGroup::Reifier).unwrap_or(groups.len());
    let mut task_opt = AdamState::new(schedule.lr_task, &model.params());
    let mut denoise_opt = AdamState::new(schedule.lr_denoise, &model.params());
    let denoise_sigma = model.reifier_sigma();
    let use_denoise = denoise_sigma.is_some() && schedule.denoise_weight > 0.0;
    let task_mask: Vec<bool> = groups
        .iter()
        .map(|g| !(*g == ParamGroup::Reifier && schedule.loss_routing == LossRouting::AttractorOnlyDenoise))
        .collect();

    let n = data.len();
    let full = match schedule.batch_mode {
        BatchMode::FullBatch => {
            let idx: Vec<usize> = (0..n).collect();
            Some((data.steps(&idx)?, data.target_column(&idx)))
        }
        BatchMode::MiniBatch(_) => None,
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(derive_seed(seed, 0));

    let mut best: Option<Checkpoint> = None;
    let mut history = Vec::new();
    let offer = |best: &mut Option<Checkpoint>, params: Vec<Tensor>, acc: f64, epoch: usize| {
        if best.as_ref().is_none_or(|b| acc > b.train_accuracy) {
            *best = Some(Checkpoint {
                params,
                train_accuracy: acc,
                epoch,
            });
        }
    };

    for epoch in 0..schedule.max_epochs {
        let batches: Vec<Vec<usize>> = match schedule.batch_mode {
            BatchMode::FullBatch => vec![Vec::new()],
            BatchMode::MiniBatch(size) => {
                order.shuffle(&mut rng);
                order.chunks(size).map(<[usize]>::to_vec).collect()
            }
        };
        let denoise_now = use_denoise && epoch >= schedule.denoise_start_epoch;
        let (mut task_sum, mut denoise_sum) = (0.0, 0.0);
        let mut pre_update_acc = None;
        for (b, idx) in batches.iter().enumerate() {
            let (steps, targets) = match &full {
                Some((s, t)) => (s.clone(), t.clone()),
                None => (data.steps(idx)?, data.target_column(idx)),
            };
            let rows = targets.rows();
            let mut g = Graph::new();
            let vars = model.register(&mut g, true);
            let trace = model.graph_forward(&mut g, &vars, &steps)?;
            let tv = g.constant(targets.clone());
            let loss = g.mse(trace.prediction, tv)?;
            let loss_value = g.value(loss).data()[0];
            if !loss_value.is_finite() {
                return Err(Error::NonFinite {
                    what: "task loss".into(),
                    epoch,
                });
            }
            task_sum += loss_value * rows as f64;
            if full.is_some() {
                let acc = accuracy(g.value(trace.prediction).data(), targets.data())?;
                offer(&mut best, model.snapshot(), acc, epoch);
                pre_update_acc = Some(acc);
            }
            g.backward(loss)?;
            let all = vars.all();
            let grads: Vec<Option<Tensor>> = all
                .iter()
                .zip(&task_mask)
                .map(|(v, &on)| if on { g.grad(*v).cloned() } else { None })
                .collect();
            let hidden: Vec<Tensor> = if denoise_now {
                trace.hidden.iter().map(|h| g.value(*h).clone()).collect()
            } else {
                Vec::new()
            };
            drop(g);
            let refs: Vec<Option<&Tensor>> = grads.iter().map(Option::as_ref).collect();
            task_opt.step_masked(&mut model.params_mut(), &refs)?;
            keep_diagonal(model);

            if denoise_now {
                let sigma = denoise_sigma.expect("reifier present");
                let noise_seed = derive_seed(seed, 1 + (epoch * batches.len() + b) as u64);
                let (mut dg, dloss, dvars) = reify_denoise_loss(model, &hidden, sigma, noise_seed)?;
                let dvalue = dg.value(dloss).data()[0];
                if !dvalue.is_finite() {
                    return Err(Error::NonFinite {
                        what: "denoising loss".into(),
                        epoch,
                    });
                }
                denoise_sum += dvalue * rows as f64;
                dg.backward(dloss)?;
                let w = schedule.denoise_weight;
                let dgrads: Vec<Option<Tensor>> = (0..groups.len())
                    .map(|i| {
                        i.checked_sub(reifier_start)
                            .and_then(|j| dvars.get(j))
                            .and_then(|v| dg.grad(*v))
                            .map(|t| if w == 1.0 { t.clone() } else { t.map(|x| x * w) })
                    })
                    .collect();
                let refs: Vec<Option<&Tensor>> = dgrads.iter().map(Option::as_ref).collect();
                denoise_opt.step_masked(&mut model.params_mut(), &refs)?;
                keep_diagonal(model);
            }
        }
        let train_accuracy = match pre_update_acc {
            Some(a) => a,
            None => {
                let acc = model_accuracy(model, data)?;
                offer(&mut best, model.snapshot(), acc, epoch + 1);
                acc
            }
        };
        history.push(EpochRecord {
            epoch,
            task_loss: task_sum / n as f64,
            denoise_loss: denoise_now.then(|| denoise_sum / n as f64),
            train_accuracy,
        });
        if schedule.stop_on_perfect_train && train_accuracy >= 1.0 {
            break;
        }
    }

    // Full-batch accuracies are measured before each update, so the weights
    // after the final update have not been scored yet.
    let stopped_early = history.last().is_some_and(|r| r.train_accuracy >= 1.0) && schedule.stop_on_perfect_train;
    if full.is_some() && !stopped_early {
        let acc = model_accuracy(model, data)?;
        offer(&mut best, model.snapshot(), acc, history.len());
    }
    let best = match best {
        Some(b) => b,
        None => {
            // Zero epochs: score the initial weights.
            let acc = model_accuracy(model, data)?;
            Checkpoint {
                params: model.snapshot(),
                train_accuracy: acc,
                epoch: 0,
            }
        }
    };
    model.restore(&best.params)?;
    Ok(TrainOutcome { best, history })
}

/// Writes `epoch,task_loss,denoise_loss,train_acc` rows; an inactive
/// denoising loss is an empty field.
pub fn write_history_csv<W: Write>(mut out: W, history: &[EpochRecord]) -> Result<()> {
    writeln!(out, "epoch,task_loss,denoise_loss,train_acc")?;
    for r in history {
        let d = r.denoise_loss.map(|d| d.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", r.epoch, r.task_loss, d, r.train_accuracy)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attractor::AttractorConfig;
    use crate::rnn::CellKind;
    use crate::tasks::gen_parity;

    fn model() -> SdrnnModel {
        SdrnnModel::new(CellKind::Tanh, 1, 4, 1, 3).with_attractor(8, AttractorConfig::default().with_iterations(3), 3)
    }

    /// One epoch as a single minibatch: one task step, then one denoising step.
    fn one_step(weight: f64) -> SdrnnModel {
        let data = gen_parity(5).train;
        let schedule = TrainSchedule {
            max_epochs: 1,
            denoise_weight: weight,
            loss_routing: LossRouting::AttractorOnlyDenoise,
            stop_on_perfect_train: false,
            batch_mode: BatchMode::MiniBatch(data.len()),
            ..TrainSchedule::default()
        };
        let mut m = model();
        train_sdrnn(&mut m, &data, &schedule, 9).unwrap();
        m
    }

    fn split(m: &SdrnnModel) -> (Vec<Tensor>, Vec<Tensor>) {
        let groups = m.param_groups();
        let mut rest = Vec::new();
        let mut reifier = Vec::new();
        for (g, t) in groups.iter().zip(m.snapshot()) {
            if *g == ParamGroup::Reifier {
                reifier.push(t);
            } else {
                rest.push(t);
            }
        }
        (rest, reifier)
    }

    #[test]
    fn denoising_step_moves_only_the_reifier() {
        let (rest_off, reifier_off) = split(&one_step(0.0));
        let (rest_on, reifier_on) = split(&one_step(1.0));
        let (rest_init, reifier_init) = split(&model());
        assert_eq!(rest_off, rest_on);
        assert_ne!(rest_on, rest_init);
        assert_ne!(reifier_on, reifier_off);
        // Task loss is routed away from the reifier, and the denoising loss is off.
        assert_eq!(reifier_off, reifier_init);
    }

    #[test]
    fn zero_weight_keeps_attractor_at_init_over_many_epochs() {
        let data = gen_parity(6).train;
        let schedule = TrainSchedule {
            max_epochs: 20,
            denoise_weight: 0.0,
            loss_routing: LossRouting::AttractorOnlyDenoise,
            ..TrainSchedule::default()
        };
        let mut m = model();
        train_sdrnn(&mut m, &data, &schedule, 1).unwrap();
        assert_eq!(split(&m).1, split(&model()).1);
    }

    #[test]
    fn same_seed_same_run() {
        let data = gen_parity(7).train;
        let schedule = TrainSchedule {
            max_epochs: 5,
            batch_mode: BatchMode::MiniBatch(32),
            ..TrainSchedule::default()
        };
        let run = || {
            let mut m = model();
            let out = train_sdrnn(&mut m, &data, &schedule, 4).unwrap();
            (m.snapshot(), out.history)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn best_checkpoint_is_restored() {
        let data = gen_parity(8).train;
        let schedule = TrainSchedule {
            max_epochs: 10,
            stop_on_perfect_train: false,
            ..TrainSchedule::default()
        };
        let mut m = model();
        let out = train_sdrnn(&mut m, &data, &schedule, 2).unwrap();
        let best = out.history.iter().map(|r| r.train_accuracy).fold(0.0, f64::max);
        assert!(out.best.train_accuracy >= best);
        assert_eq!(m.snapshot(), out.best.params);
        assert_eq!(model_accuracy(&m, &data).unwrap(), out.best.train_accuracy);
    }
}
