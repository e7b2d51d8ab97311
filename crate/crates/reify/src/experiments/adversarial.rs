//! Adversarially trained MLPs on 2-D blobs, with and without per-layer DAEs.

use reify_core::adversarial::{
    adv_train, clean_accuracy, pgd_iterates, robust_accuracy, AdvTrainConfig, AttackConfig, AttackVariant, ReifiedMlp,
};
use reify_core::derive_seed;
use reify_core::tasks::gen_blobs;
use reify_core::Tensor;

use super::{at_least, one_of, p, positive, Metrics, ParamDef};
use crate::spec::Condition;
use crate::{Error, Result};

pub(super) const PARAMS: &[ParamDef] = &[
    p("model", "baseline,reified", "baseline | reified (DAE on every hidden layer)"),
    p("n_per_class", "500", "training and test examples per class"),
    p("separation", "3.3", "distance between blob centres (unit std); 3.3 gives ~95% Bayes accuracy"),
    p("layers", "2", "hidden layers"),
    p("width", "32", "units per hidden layer"),
    p("bottleneck", "16", "DAE hidden units"),
    p("dae_sigma", "0.1", "DAE corruption std"),
    p("lambda_rec", "1.0", "weight on the reconstruction losses"),
    p("epsilon", "0.75", "L-inf attack radius (train and test)"),
    p("train_steps", "7", "PGD steps while training"),
    p("eval_steps", "20", "PGD steps at evaluation"),
    p("epochs", "30", "training epochs"),
    p("batch_size", "64", "minibatch size"),
    p("lr", "0.01", "ADAM learning rate"),
];

struct Setup {
    reified: bool,
    n_per_class: usize,
    separation: f64,
    widths: Vec<usize>,
    bottleneck: usize,
    dae_sigma: f64,
    lambda_rec: f64,
    train: AdvTrainConfig,
    epsilon: f64,
    eval_steps: usize,
}

fn setup(c: &Condition) -> Result<Setup> {
    let reified = one_of(c, "model", &["baseline", "reified"])? == "reified";
    let epsilon = positive(c, "epsilon")?;
    let train = AdvTrainConfig {
        epochs: c.usize("epochs")?,
        batch_size: at_least(c, "batch_size", 1)?,
        lr: positive(c, "lr")?,
        attack: AttackConfig::new(epsilon, at_least(c, "train_steps", 1)?, AttackVariant::Full),
    };
    train.attack.validate()?;
    let lambda_rec = c.f64("lambda_rec")?;
    if lambda_rec < 0.0 {
        return Err(Error::Spec("lambda_rec must be >= 0".into()));
    }
    Ok(Setup {
        reified,
        n_per_class: at_least(c, "n_per_class", 1)?,
        separation: positive(c, "separation")?,
        widths: vec![at_least(c, "width", 1)?; at_least(c, "layers", 1)?],
        bottleneck: at_least(c, "bottleneck", 1)?,
        dae_sigma: positive(c, "dae_sigma")?,
        lambda_rec,
        train,
        epsilon,
        eval_steps: at_least(c, "eval_steps", 1)?,
    })
}

pub(super) fn check(c: &Condition) -> Result<()> {
    setup(c).map(|_| ())
}

/// Largest `‖x_t − x‖∞ − ε` over all iterates; `<= 0` when the ball holds.
fn ball_excess(iterates: &[Tensor], eps: f64) -> f64 {
    let x0 = &iterates[0];
    iterates
        .iter()
        .flat_map(|x| x.data().iter().zip(x0.data()).map(|(a, b)| (a - b).abs() - eps))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Both model kinds share the data and the MLP weights of a replication;
/// only the reified model carries DAEs.
pub(super) fn run(c: &Condition, seed: u64) -> Result<Metrics> {
    let s = setup(c)?;
    let data = gen_blobs(s.n_per_class, s.separation, derive_seed(seed, 30))?;
    let reified: Vec<usize> = if s.reified { (0..s.widths.len()).collect() } else { Vec::new() };
    let lambda = if s.reified { s.lambda_rec } else { 0.0 };
    let mut model = ReifiedMlp::new(2, &s.widths, &reified, s.bottleneck, s.dae_sigma, lambda, derive_seed(seed, 31))?;
    let history = adv_train(&mut model, &data.train, &s.train, derive_seed(seed, 32))?;

    let eval = |variant| AttackConfig::new(s.epsilon, s.eval_steps, variant);
    let test = &data.test;
    let es = derive_seed(seed, 33);
    let full = eval(AttackVariant::Full);
    let rows: Vec<Vec<f64>> = test.inputs.iter().map(|q| q.concat()).collect();
    let x = Tensor::from_rows(&rows).map_err(reify_core::Error::from)?;
    let y = Tensor::matrix(test.len(), 1, test.targets.clone());
    let iterates = pgd_iterates(&model, &x, &y, &full, true, derive_seed(es, 9))?;

    let last = history.last().copied();
    Ok(vec![
        ("clean_acc", clean_accuracy(&model, test, true, derive_seed(es, 0))?),
        ("clean_acc_noiseless", clean_accuracy(&model, test, false, derive_seed(es, 1))?),
        ("robust_full", robust_accuracy(&model, test, &full, true, derive_seed(es, 2))?),
        ("robust_full_noiseless_eval", robust_accuracy(&model, test, &full, false, derive_seed(es, 3))?),
        ("robust_bpda", robust_accuracy(&model, test, &eval(AttackVariant::Bpda), true, derive_seed(es, 4))?),
        ("robust_noiseless", robust_accuracy(&model, test, &eval(AttackVariant::Noiseless), true, derive_seed(es, 5))?),
        ("ball_excess", ball_excess(&iterates, s.epsilon)),
        ("final_task_clean", last.map_or(f64::NAN, |l| l.task_clean)),
        ("final_task_adv", last.map_or(f64::NAN, |l| l.task_adv)),
        ("final_rec", last.map_or(f64::NAN, |l| l.rec)),
    ])
}
