//! Feedforward classifier with DAE-reified hidden layers, L∞ PGD attacks
//! (full gradient, BPDA, noiseless), and adversarial training.
//!
//! Hidden layer `i` computes `h_i = tanh(W_i h̃_{i-1} + b_i)`; a reified layer
//! passes `h̃_i = r_i(h_i + a)` on, with `a ~ N(0, σ_i²)` when noise is on.
//! The output is a single logistic unit scored by MSE against {0,1}.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dae::{graph_reconstruct, Dae, DaeVars};
use crate::params::Parameterized;
use crate::rnn::slice_rows;
use crate::tasks::Dataset;
use crate::train::{accuracy, AdamState};
use crate::{derive_seed, rng_from_seed, Error, Graph, Result, SeededRng, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `[out, in]`
    pub w: Tensor,
    /// `[out]`
    pub b: Tensor,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            w: Tensor::glorot(output, input, rng),
            b: Tensor::zeros(&[output]),
        }
    }

    pub fn width(&self) -> usize {
        self.b.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReifiedMlp {
    pub hidden: Vec<Dense>,
    pub output: Dense,
    /// One slot per hidden layer; `Some` marks a reified layer.
    pub reifiers: Vec<Option<Dae>>,
    pub lambda_rec: f64,
}

#[derive(Clone, Debug)]
pub struct MlpVars {
    pub hidden: Vec<[Var; 2]>,
    pub output: [Var; 2],
    pub reifiers: Vec<Option<DaeVars>>,
}

impl MlpVars {
    pub fn all(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self.hidden.iter().flatten().copied().collect();
        out.extend(self.output);
        for d in self.reifiers.iter().flatten() {
            out.extend([d.w_enc, d.b_enc, d.w_dec, d.b_dec]);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackVariant {
    /// Gradients flow through the DAEs; forward noise follows the caller.
    Full,
    /// DAEs are used forward but treated as the identity backward.
    Bpda,
    /// Corruption disabled in both passes.
    Noiseless,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub steps: usize,
    pub variant: AttackVariant,
    /// Valid input box, applied to every coordinate after projection.
    pub clip: Option<(f64, f64)>,
}

impl AttackConfig {
    /// Step size defaults to `2.5 ε / steps`.
    pub fn new(epsilon: f64, steps: usize, variant: AttackVariant) -> Self {
        Self {
            epsilon,
            alpha: 2.5 * epsilon / steps.max(1) as f64,
            steps,
            variant,
            clip: None,
        }
    }

    /// Single signed step of size ε.
    pub fn fgsm(epsilon: f64) -> Self {
        Self {
            alpha: epsilon,
            ..Self::new(epsilon, 1, AttackVariant::Full)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !(self.alpha > 0.0) || self.steps == 0 {
            return Err(Error::Config(format!(
                "attack needs epsilon >= 0, alpha > 0, steps >= 1 (got {}, {}, {})",
                self.epsilon, self.alpha, self.steps
            )));
        }
        if let Some((lo, hi)) = self.clip {
            if !(lo < hi) {
                return Err(Error::Config(format!("empty clip box [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// How a forward pass treats the reifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForwardMode {
    pub noise: bool,
    pub bpda: bool,
}

impl ForwardMode {
    pub const CLEAN: ForwardMode = ForwardMode {
        noise: false,
        bpda: false,
    };
    pub const NOISY: ForwardMode = ForwardMode {
        noise: true,
        bpda: false,
    };
}

#[derive(Clone, Debug)]
pub struct MlpTrace {
    /// `[B, 1]` logistic outputs.
    pub prediction: Var,
    /// Pre-reification activations per hidden layer.
    pub hidden: Vec<Var>,
    /// Reconstruction loss of each reified layer (mean over rows of
    /// `‖r(h + a) − h‖²`).
    pub rec_losses: Vec<Var>,
}

impl ReifiedMlp {
    /// `widths` hidden layers on `input` features; DAEs of the given bottleneck
    /// and noise on the layers listed in `reified`.
    pub fn new(
        input: usize,
        widths: &[usize],
        reified: &[usize],
        bottleneck: usize,
        dae_sigma: f64,
        lambda_rec: f64,
        seed: u64,
    ) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::Config("need at least one hidden layer".into()));
        }
        if let Some(&bad) = reified.iter().find(|&&i| i >= widths.len()) {
            return Err(Error::Config(format!("reified layer {bad} out of range")));
        }
        if !(lambda_rec >= 0.0) {
            return Err(Error::Config("lambda_rec must be >= 0".into()));
        }
        let mut rng = rng_from_seed(derive_seed(seed, 1));
        let mut hidden = Vec::with_capacity(widths.len());
        let mut prev = input;
        for &w in widths {
            hidden.push(Dense::new(prev, w, &mut rng));
            prev = w;
        }
        let output = Dense::new(prev, 1, &mut rng);
        let reifiers = widths
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                reified
                    .contains(&i)
                    .then(|| Dae::new(w, bottleneck, dae_sigma, derive_seed(seed, 100 + i as u64)))
            })
            .collect();
        Ok(Self {
            hidden,
            output,
            reifiers,
            lambda_rec,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.hidden[0].w.cols()
    }

    pub fn is_reified(&self) -> bool {
        self.reifiers.iter().any(Option::is_some)
    }

    pub fn register(&self, g: &mut Graph, trainable: bool) -> MlpVars {
        let mut put = |t: &Tensor| {
            if trainable {
                g.param(t.clone())
            } else {
                g.constant(t.clone())
            }
        };
        let hidden = self.hidden.iter().map(|d| [put(&d.w), put(&d.b)]).collect();
        let output = [put(&self.output.w), put(&self.output.b)];
        let reifiers = self
            .reifiers
            .iter()
            .map(|r| r.as_ref().map(|d| d.register(g, trainable)))
            .collect();
        MlpVars {
            hidden,
            output,
            reifiers,
        }
    }

    /// Forward pass on the tape; noise draws come from `rng`.
    pub fn forward(
        &self,
        g: &mut Graph,
        vars: &MlpVars,
        x: Var,
        mode: ForwardMode,
        rng: &mut SeededRng,
    ) -> Result<MlpTrace> {
        let mut state = x;
        let mut hidden = Vec::with_capacity(self.hidden.len());
        let mut rec_losses = Vec::new();
        for (i, layer) in vars.hidden.iter().enumerate() {
            let pre = g.matmul_t(state, layer[0])?;
            let pre = g.add_row(pre, layer[1])?;
            let h = g.tanh(pre);
            hidden.push(h);
            state = h;
            if let (Some(dae), Some(dv)) = (&self.reifiers[i], &vars.reifiers[i]) {
                let input = if mode.noise && dae.sigma > 0.0 {
                    let normal = Normal::new(0.0, dae.sigma).expect("sigma > 0");
                    let noise = g.value(h).map(|_| normal.sample(rng));
                    let nv = g.constant(noise);
                    g.add(h, nv)?
                } else {
                    h
                };
                let recon = graph_reconstruct(g, dv, input)?;
                let diff = g.sub(recon, h)?;
                let per_row = g.row_sq_norm(diff)?;
                rec_losses.push(g.mean(per_row));
                state = if mode.bpda { g.straight_through(recon, h)? } else { recon };
            }
        }
        let logits = g.matmul_t(state, vars.output[0])?;
        let logits = g.add_row(logits, vars.output[1])?;
        let prediction = g.sigmoid(logits);
        Ok(MlpTrace {
            prediction,
            hidden,
            rec_losses,
        })
    }

    /// Untracked predictions for `x` `[B, in]`.
    pub fn predict(&self, x: &Tensor, noise: bool, seed: u64) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let vars = self.register(&mut g, false);
        let xv = g.constant(x.clone());
        let mut rng = rng_from_seed(seed);
        let mode = ForwardMode { noise, bpda: false };
        let trace = self.forward(&mut g, &vars, xv, mode, &mut rng)?;
        Ok(g.value(trace.prediction).data().to_vec())
    }

    /// `d L_task / d x` for the batch under an attack variant.
    pub fn input_gradient(
        &self,
        x: &Tensor,
        y: &Tensor,
        variant: AttackVariant,
        noise: bool,
        rng: &mut SeededRng,
    ) -> Result<Tensor> {
        let mut g = Graph::new();
        let vars = self.register(&mut g, false);
        let xv = g.param(x.clone());
        let mode = match variant {
            AttackVariant::Full => ForwardMode { noise, bpda: false },
            AttackVariant::Bpda => ForwardMode { noise, bpda: true },
            AttackVariant::Noiseless => ForwardMode::CLEAN,
        };
        let trace = self.forward(&mut g, &vars, xv, mode, rng)?;
        let yv = g.constant(y.clone());
        let loss = g.mse(trace.prediction, yv)?;
        g.backward(loss)?;
        let grad = g.grad(xv).cloned().expect("input is tracked");
        if !grad.all_finite() {
            return Err(Error::Domain("non-finite input gradient".into()));
        }
        Ok(grad)
    }
}

impl Parameterized for ReifiedMlp {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, d) in self.hidden.iter().enumerate() {
            out.push((format!("mlp.{i}.w"), &d.w));
            out.push((format!("mlp.{i}.b"), &d.b));
        }
        out.push(("mlp.out.w".into(), &self.output.w));
        out.push(("mlp.out.b".into(), &self.output.b));
        for (i, r) in self.reifiers.iter().enumerate() {
            if let Some(d) = r {
                out.extend(d.named_params().into_iter().map(|(n, t)| (format!("mlp.{i}.{n}"), t)));
            }
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for d in &mut self.hidden {
            out.push(&mut d.w);
            out.push(&mut d.b);
        }
        out.push(&mut self.output.w);
        out.push(&mut self.output.b);
        for d in self.reifiers.iter_mut().flatten() {
            out.extend(d.params_mut());
        }
        out
    }
}

fn project(x: &mut Tensor, center: &Tensor, cfg: &AttackConfig) {
    for (v, &c) in x.data_mut().iter_mut().zip(center.data()) {
        *v = v.clamp(c - cfg.epsilon, c + cfg.epsilon);
        if let Some((lo, hi)) = cfg.clip {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Every PGD iterate, starting from the clean input `x⁰ = x`.
///
/// `noise` turns on DAE corruption in the attack's forward passes (ignored by
/// the noiseless variant).
pub fn pgd_iterates(
    model: &ReifiedMlp,
    x: &Tensor,
    y: &Tensor,
    cfg: &AttackConfig,
    noise: bool,
    seed: u64,
) -> Result<Vec<Tensor>> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(cfg.steps + 1);
    out.push(x.clone());
    let mut cur = x.clone();
    for _ in 0..cfg.steps {
        let grad = model.input_gradient(&cur, y, cfg.variant, noise, &mut rng)?;
        for (v, d) in cur.data_mut().iter_mut().zip(grad.data()) {
            // sgn(0) = 0: no move where the loss is flat.
            if *d != 0.0 {
                *v += cfg.alpha * d.signum();
            }
        }
        project(&mut cur, x, cfg);
        out.push(cur.clone());
    }
    Ok(out)
}

/// `x̃` after `cfg.steps` projected signed-gradient steps.
pub fn pgd_attack(
    model: &ReifiedMlp,
    x: &Tensor,
    y: &Tensor,
    cfg: &AttackConfig,
    noise: bool,
    seed: u64,
) -> Result<Tensor> {
    Ok(pgd_iterates(model, x, y, cfg, noise, seed)?.pop().expect("at least x⁰"))
}

fn dataset_matrix(data: &Dataset) -> Result<(Tensor, Tensor)> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let rows: Vec<Vec<f64>> = data.inputs.iter().map(|s| s.concat()).collect();
    let x = Tensor::from_rows(&rows)?;
    let y = Tensor::matrix(data.len(), 1, data.targets.clone());
    Ok((x, y))
}

/// Accuracy on the attacked test set. `eval_noise` controls DAE corruption
/// both while attacking (full variant) and when scoring the attacked inputs.
pub fn robust_accuracy(model: &ReifiedMlp, data: &Dataset, cfg: &AttackConfig, eval_noise: bool, seed: u64) -> Result<f64> {
    let (x, y) = dataset_matrix(data)?;
    let adv = pgd_attack(model, &x, &y, cfg, eval_noise, derive_seed(seed, 0))?;
    let p = model.predict(&adv, eval_noise, derive_seed(seed, 1))?;
    accuracy(&p, &data.targets)
}

pub fn clean_accuracy(model: &ReifiedMlp, data: &Dataset, noise: bool, seed: u64) -> Result<f64> {
    let (x, _) = dataset_matrix(data)?;
    accuracy(&model.predict(&x, noise, seed)?, &data.targets)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdvLosses {
    pub task_clean: f64,
    pub task_adv: f64,
    pub rec: f64,
}

/// One update on `L_task(x) + L_task(x̃) + λ Σ L_rec`, with `x̃` from a
/// noisy full-gradient PGD attack on the current weights.
pub fn adv_train_step(
    model: &mut ReifiedMlp,
    x: &Tensor,
    y: &Tensor,
    cfg: &AttackConfig,
    opt: &mut AdamState,
    seed: u64,
) -> Result<AdvLosses> {
    let adv = pgd_attack(model, x, y, cfg, true, derive_seed(seed, 0))?;
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let mut g = Graph::new();
    let vars = model.register(&mut g, true);
    let yv = g.constant(y.clone());
    let xv = g.constant(x.clone());
    let clean = model.forward(&mut g, &vars, xv, ForwardMode::NOISY, &mut rng)?;
    let av = g.constant(adv);
    let attacked = model.forward(&mut g, &vars, av, ForwardMode::NOISY, &mut rng)?;
    let l_clean = g.mse(clean.prediction, yv)?;
    let l_adv = g.mse(attacked.prediction, yv)?;
    let mut total = g.add(l_clean, l_adv)?;
    let mut rec_value = 0.0;
    for &r in &clean.rec_losses {
        rec_value += g.value(r).data()[0];
        if model.lambda_rec > 0.0 {
            let scaled = g.scale(r, model.lambda_rec);
            total = g.add(total, scaled)?;
        }
    }
    let losses = AdvLosses {
        task_clean: g.value(l_clean).data()[0],
        task_adv: g.value(l_adv).data()[0],
        rec: rec_value,
    };
    if !g.value(total).all_finite() {
        return Err(Error::NonFinite {
            what: "adversarial training loss".into(),
            epoch: 0,
        });
    }
    g.backward(total)?;
    let grads: Vec<Tensor> = vars
        .all()
        .iter()
        .map(|v| g.grad(*v).cloned().expect("tracked parameter"))
        .collect();
    let refs: Vec<&Tensor> = grads.iter().collect();
    opt.step(&mut model.params_mut(), &refs)?;
    Ok(losses)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdvTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub attack: AttackConfig,
}

/// Minibatch adversarial training; returns the mean per-epoch losses.
pub fn adv_train(model: &mut ReifiedMlp, data: &Dataset, cfg: &AdvTrainConfig, seed: u64) -> Result<Vec<AdvLosses>> {
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config("batch_size and lr must be positive".into()));
    }
    let (x, y) = dataset_matrix(data)?;
    let mut opt = AdamState::new(cfg.lr, &model.params());
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let xs = take_rows(&x, &order);
        let ys = take_rows(&y, &order);
        let mut sum = AdvLosses {
            task_clean: 0.0,
            task_adv: 0.0,
            rec: 0.0,
        };
        let mut start = 0;
        let mut step = 0u64;
        while start < order.len() {
            let end = (start + cfg.batch_size).min(order.len());
            let step_seed = derive_seed(seed, 1 + (epoch as u64) * 100_000 + step);
            let l = adv_train_step(
                model,
                &slice_rows(&xs, start, end),
                &slice_rows(&ys, start, end),
                &cfg.attack,
                &mut opt,
                step_seed,
            )
            .map_err(|e| match e {
                Error::NonFinite { what, .. } => Error::NonFinite { what, epoch },
                other => other,
            })?;
            let w = (end - start) as f64;
            sum.task_clean += l.task_clean * w;
            sum.task_adv += l.task_adv * w;
            sum.rec += l.rec * w;
            start = end;
            step += 1;
        }
        let n = order.len() as f64;
        history.push(AdvLosses {
            task_clean: sum.task_clean / n,
            task_adv: sum.task_adv / n,
            rec: sum.rec / n,
        });
    }
    Ok(history)
}

fn take_rows(t: &Tensor, idx: &[usize]) -> Tensor {
    let c = t.cols();
    let mut data = Vec::with_capacity(idx.len() * c);
    for &i in idx {
        data.extend_from_slice(t.row(i));
    }
    Tensor::matrix(idx.len(), c, data)
}
