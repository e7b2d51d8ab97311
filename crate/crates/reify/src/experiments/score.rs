//! A DAE fitted to 1-D standard normal samples. Its displacement
//! `(r(x) − x)/σ²` should track the analytic score `−x`.

use rand_distr::{Distribution, StandardNormal};
use reify_core::dae::Dae;
use reify_core::train::{train_dae, DaeTrainConfig};
use reify_core::{derive_seed, rng_from_seed, Tensor};

use super::{at_least, p, positive, Metrics, ParamDef};
use crate::spec::Condition;
use crate::Result;

pub(super) const PARAMS: &[ParamDef] = &[
    p("sigma", "0.1", "DAE corruption std"),
    p("samples", "8000", "training samples"),
    p("bottleneck", "16", "DAE hidden units"),
    p("epochs", "2000", "training epochs"),
    p("batch_size", "1000", "minibatch size"),
    p("lr", "0.001", "ADAM learning rate"),
    p("grid", "201", "evaluation points spread evenly over [-2, 2]"),
];

struct Setup {
    sigma: f64,
    samples: usize,
    bottleneck: usize,
    train: DaeTrainConfig,
    grid: usize,
}

fn setup(c: &Condition) -> Result<Setup> {
    Ok(Setup {
        sigma: positive(c, "sigma")?,
        samples: at_least(c, "samples", 1)?,
        bottleneck: at_least(c, "bottleneck", 1)?,
        train: DaeTrainConfig {
            epochs: c.usize("epochs")?,
            batch_size: at_least(c, "batch_size", 1)?,
            lr: positive(c, "lr")?,
        },
        grid: at_least(c, "grid", 2)?,
    })
}

pub(super) fn check(c: &Condition) -> Result<()> {
    setup(c).map(|_| ())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

pub(super) fn run(c: &Condition, seed: u64) -> Result<Metrics> {
    let s = setup(c)?;
    let mut rng = rng_from_seed(derive_seed(seed, 40));
    let xs: Vec<f64> = (0..s.samples).map(|_| StandardNormal.sample(&mut rng)).collect();
    let data = Tensor::matrix(s.samples, 1, xs);
    let mut dae = Dae::new(1, s.bottleneck, s.sigma, derive_seed(seed, 41));
    let history = train_dae(&mut dae, &data, &s.train, derive_seed(seed, 42))?;

    let grid: Vec<f64> = (0..s.grid).map(|i| -2.0 + 4.0 * i as f64 / (s.grid - 1) as f64).collect();
    let r = dae.reconstruct(&Tensor::matrix(s.grid, 1, grid.clone()))?;
    let s2 = s.sigma * s.sigma;
    let est: Vec<f64> = r.data().iter().zip(&grid).map(|(r, x)| (r - x) / s2).collect();
    let truth: Vec<f64> = grid.iter().map(|x| -x).collect();
    // In 1-D the cosine of two scalars is just sign agreement.
    let off_zero: Vec<(f64, f64)> = est.iter().zip(&truth).filter(|(_, t)| **t != 0.0).map(|(e, t)| (*e, *t)).collect();
    let sign_agree = off_zero.iter().filter(|(e, t)| e.signum() == t.signum()).count() as f64 / off_zero.len() as f64;
    let rmse = (est.iter().zip(&truth).map(|(e, t)| (e - t).powi(2)).sum::<f64>() / s.grid as f64).sqrt();
    Ok(vec![
        ("correlation", pearson(&est, &truth)),
        ("sign_agreement", sign_agree),
        ("rmse", rmse),
        ("final_loss", history.last().copied().unwrap_or(f64::NAN)),
    ])
}
