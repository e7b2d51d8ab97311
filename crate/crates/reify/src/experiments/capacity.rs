use reify_core::attractor::{AttractorConfig, RunMode, Variant};
use reify_core::derive_seed;
use reify_core::tasks::gen_attractor_targets;
use reify_core::train::{train_attractor_standalone, StandaloneConfig};

use super::{at_least, one_of, p, positive, Metrics, ParamDef};
use crate::spec::Condition;
use crate::Result;

pub(super) const PARAMS: &[ParamDef] = &[
    p("a", "25,50,100,150,200,250", "attractors to store"),
    p("n", "50,100,150,200", "attractor units"),
    p("sigma_train", "0.125,0.25,0.5", "training noise (atanh domain)"),
    p("sigma_test", "0.25", "evaluation noise"),
    p("m", "50", "input/output width"),
    p("kappa", "50", "noisy instances per attractor, for each of train and test"),
    p("epochs", "10", "passes over the kappa*A training instances"),
    p("batch_size", "64", "minibatch size"),
    p("lr", "0.003", "ADAM learning rate"),
    p("delta", "0.01", "convergence tolerance on ||y_k - y_(k-2)||_inf"),
    p("max_iter", "100", "iteration cap when running to convergence"),
    p("clamp_diagonal", "false", "keep w_ii >= 0 after every update"),
    p("variant", "shifted", "shifted | standard"),
];

struct Setup {
    a: usize,
    m: usize,
    kappa: usize,
    cfg: StandaloneConfig,
}

fn setup(c: &Condition) -> Result<Setup> {
    let variant = match one_of(c, "variant", &["shifted", "standard"])? {
        "shifted" => Variant::ShiftedNonlinearity,
        _ => Variant::Standard,
    };
    let attractor = AttractorConfig {
        variant,
        run_mode: RunMode::ToConvergence {
            delta: positive(c, "delta")?,
            max_iter: at_least(c, "max_iter", 2)?,
        },
        sigma: positive(c, "sigma_train")?,
        clamp_diagonal: c.bool("clamp_diagonal")?,
        ..AttractorConfig::default()
    };
    let cfg = StandaloneConfig {
        attractor,
        n: at_least(c, "n", 1)?,
        sigma_test: c.f64("sigma_test")?,
        epochs: c.usize("epochs")?,
        batch_size: at_least(c, "batch_size", 1)?,
        lr: positive(c, "lr")?,
        ..StandaloneConfig::default()
    };
    cfg.attractor.validate()?;
    if cfg.sigma_test < 0.0 {
        return Err(crate::Error::Spec("sigma_test must be >= 0".into()));
    }
    Ok(Setup {
        a: at_least(c, "a", 1)?,
        m: at_least(c, "m", 1)?,
        kappa: at_least(c, "kappa", 1)?,
        cfg,
    })
}

pub(super) fn check(c: &Condition) -> Result<()> {
    setup(c).map(|_| ())
}

/// Targets depend on `(A, seed)` only and the net initialisation on the seed,
/// so every `n`/`sigma_train` level in a replication sees the same attractors.
pub(super) fn run(c: &Condition, seed: u64) -> Result<Metrics> {
    let s = setup(c)?;
    let targets = gen_attractor_targets(s.a, s.m, s.kappa, derive_seed(seed, 10))?;
    let out = train_attractor_standalone(&targets, &s.cfg, derive_seed(seed, 11))?;
    let run = out.net.run_batch(&out.test.x_hat.map(f64::tanh), &s.cfg.attractor)?;
    let cues = run.iterations.len() as f64;
    let frac = |pred: &dyn Fn(usize) -> bool| run.iterations.iter().filter(|&&k| pred(k)).count() as f64 / cues;
    Ok(vec![
        ("suppression", out.suppression),
        ("test_loss", out.test_loss),
        ("final_train_loss", out.history.last().copied().unwrap_or(f64::NAN)),
        ("iter_mean", run.iterations.iter().sum::<usize>() as f64 / cues),
        ("iter_lt5", frac(&|k| k < 5)),
        ("iter_lt10", frac(&|k| k < 10)),
        ("converged", run.converged.iter().filter(|&&b| b).count() as f64 / cues),
        ("negative_diagonal", out.net.negative_diagonal_count() as f64),
    ])
}
