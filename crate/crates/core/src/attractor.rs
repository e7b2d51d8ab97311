//! Attractor network: an affine cue projection, iterated symmetric-weight
//! dynamics started from `a₀ = 0`, and an affine readout.
//!
//! Standard variant:
//!   `c = W_in x + v_in`, `a_k = tanh(W a_{k-1} + c)`, `y = clamp(W_out a + v_out, -1, 1)`.
//!
//! Shifted-nonlinearity variant (the tanh moves back one iteration and the
//! input is mapped through `atanh` so a tanh layer feeding the net cancels):
//!   `c = W_in atanh((1-ε) x) + v_in`, `a_k = W tanh(a_{k-1}) + c`, `y = tanh(W_out a + v_out)`.
//!
//! `W` is stored as an unconstrained `V` and applied as `(V + Vᵀ)/2`, so it is
//! symmetric whatever the optimiser does to `V`.
//!
//! Row-vector convention throughout: a batch of states is `[B, n]` and the
//! update is `A·W` (valid because `W` is symmetric), `X·W_inᵀ`, `A·W_outᵀ`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::ndcore::{tanh, ATANH_GUARD};
use crate::params::Parameterized;
use crate::{rng_from_seed, Error, Graph, Result, Tensor, Var};

/// Std of the Normal draws used by [`AttractorNet::init`].
pub const INIT_STD: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Standard,
    ShiftedNonlinearity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RunMode {
    FixedIterations(usize),
    /// Stop at the first `k ≥ 2` with `‖y_k − y_{k−2}‖∞ < delta`.
    ToConvergence { delta: f64, max_iter: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttractorConfig {
    pub variant: Variant,
    pub run_mode: RunMode,
    /// Training corruption std (atanh domain).
    pub sigma: f64,
    /// ε in `atanh((1-ε)x)`.
    pub input_clip_eps: f64,
    pub ridge_lambda: f64,
    /// Apply the convergence test to hidden states instead of readouts.
    pub compare_hidden: bool,
    /// Keep `w_ii ≥ 0` (applied by the trainer after each update).
    pub clamp_diagonal: bool,
}

impl Default for AttractorConfig {
    fn default() -> Self {
        Self {
            variant: Variant::ShiftedNonlinearity,
            run_mode: RunMode::ToConvergence {
                delta: 0.01,
                max_iter: 100,
            },
            sigma: 0.25,
            input_clip_eps: 1e-6,
            ridge_lambda: 0.0,
            compare_hidden: false,
            clamp_diagonal: false,
        }
    }
}

impl AttractorConfig {
    pub fn validate(&self) -> Result<()> {
        match self.run_mode {
            RunMode::FixedIterations(k) if k < 1 => {
                return Err(Error::Config("FixedIterations needs k >= 1".into()))
            }
            RunMode::ToConvergence { delta, max_iter } if !(delta > 0.0) || max_iter < 2 => {
                return Err(Error::Config(format!(
                    "ToConvergence needs delta > 0 and max_iter >= 2 (got {delta}, {max_iter})"
                )))
            }
            _ => {}
        }
        if !(self.sigma >= 0.0) || !(self.ridge_lambda >= 0.0) {
            return Err(Error::Config("sigma and ridge_lambda must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.input_clip_eps) {
            return Err(Error::Config("input_clip_eps must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn with_iterations(mut self, k: usize) -> Self {
        self.run_mode = RunMode::FixedIterations(k);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttractorNet {
    /// Unconstrained `[n, n]`; the dynamics use `(V + Vᵀ)/2`.
    pub v: Tensor,
    /// `[n, m]`
    pub w_in: Tensor,
    /// `[n]`
    pub v_in: Tensor,
    /// `[m, n]`
    pub w_out: Tensor,
    /// `[m]`
    pub v_out: Tensor,
}

/// Result of running one cue through the dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub a_final: Vec<f64>,
    pub output: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Row-wise [`RunOutcome`] for a batch of cues.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutcome {
    pub a_final: Tensor,
    pub outputs: Tensor,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
}

/// Noisy inputs (atanh domain) paired with their clean targets.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoisingBatch {
    /// `[N, m]`, `x̂ = atanh(ξ) + η`.
    pub x_hat: Tensor,
    /// `[N, m]`
    pub xi: Tensor,
}

/// The attractor states to store and the number of noisy instances per state.
#[derive(Clone, Debug, PartialEq)]
pub struct AttractorTargets {
    pub xi: Vec<Vec<f64>>,
    pub kappa: usize,
}

impl AttractorTargets {
    pub fn new(xi: Vec<Vec<f64>>, kappa: usize) -> Result<Self> {
        if xi.iter().flatten().any(|v| !(v.abs() < 1.0)) {
            return Err(Error::Domain("attractor targets must lie in (-1, 1)".into()));
        }
        Ok(Self { xi, kappa })
    }

    pub fn count(&self) -> usize {
        self.xi.len()
    }

    pub fn dim(&self) -> usize {
        self.xi.first().map_or(0, Vec::len)
    }
}

/// Graph handles for an [`AttractorNet`] registered on a tape.
#[derive(Clone, Copy, Debug)]
pub struct AttractorVars {
    pub v: Var,
    pub w_in: Var,
    pub v_in: Var,
    pub w_out: Var,
    pub v_out: Var,
}

impl AttractorVars {
    pub fn all(&self) -> [Var; 5] {
        [self.v, self.w_in, self.v_in, self.w_out, self.v_out]
    }
}

/// A differentiable attractor run recorded on a graph.
#[derive(Clone, Copy, Debug)]
pub struct GraphRun {
    pub a_final: Var,
    pub output: Var,
    pub iterations: usize,
}

impl AttractorNet {
    /// Normal(0, 0.01²) everywhere (W drawn symmetric), plus 1 on the
    /// leading diagonal of `W_in` and `W_out`.
    pub fn init(m: usize, n: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        Self::init_with_rng(m, n, &mut rng)
    }

    pub fn init_with_rng<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        Self::init_from_draws(m, n, &mut || normal.sample(rng))
    }

    /// Initialisation with an explicit source of weight draws.
    pub fn init_from_draws(m: usize, n: usize, draw: &mut dyn FnMut() -> f64) -> Self {
        assert!(m >= 1 && n >= 1, "attractor dims must be >= 1");
        let mut v = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in i..n {
                let w = draw();
                v.set(i, j, w);
                v.set(j, i, w);
            }
        }
        let mut fill = |shape: &[usize]| {
            let mut t = Tensor::zeros(shape);
            t.data_mut().iter_mut().for_each(|x| *x = draw());
            t
        };
        let mut w_in = fill(&[n, m]);
        let v_in = fill(&[n]);
        let mut w_out = fill(&[m, n]);
        let v_out = fill(&[m]);
        for i in 0..m.min(n) {
            w_in.set(i, i, w_in.get(i, i) + 1.0);
            w_out.set(i, i, w_out.get(i, i) + 1.0);
        }
        Self {
            v,
            w_in,
            v_in,
            w_out,
            v_out,
        }
    }

    /// `m = n`, `W_in = W_out = I`, `v_in = v_out = 0`, `W = 0`.
    pub fn identity(m: usize) -> Self {
        Self {
            v: Tensor::zeros(&[m, m]),
            w_in: Tensor::identity(m),
            v_in: Tensor::zeros(&[m]),
            w_out: Tensor::identity(m),
            v_out: Tensor::zeros(&[m]),
        }
    }

    /// Input/output dimension.
    pub fn m(&self) -> usize {
        self.w_in.cols()
    }

    /// Attractor (hidden) dimension.
    pub fn n(&self) -> usize {
        self.w_in.rows()
    }

    /// `(V + Vᵀ)/2`.
    pub fn effective_w(&self) -> Tensor {
        let n = self.n();
        let mut w = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in 0..n {
                w.set(i, j, 0.5 * (self.v.get(i, j) + self.v.get(j, i)));
            }
        }
        w
    }

    /// Forces `w_ii ≥ 0` by raising negative diagonal entries of `V` to 0.
    pub fn clamp_diagonal(&mut self) {
        let n = self.n();
        for i in 0..n {
            if self.v.get(i, i) < 0.0 {
                self.v.set(i, i, 0.0);
            }
        }
    }

    pub fn negative_diagonal_count(&self) -> usize {
        (0..self.n()).filter(|&i| self.v.get(i, i) < 0.0).count()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.cols() != self.m() {
            return Err(Error::Domain(format!(
                "input width {} does not match m = {}",
                x.cols(),
                self.m()
            )));
        }
        if let Some(bad) = x.data().iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(Error::Domain(format!("input component {bad} outside [-1, 1]")));
        }
        Ok(())
    }

    /// Cue for a batch `[B, m]` of inputs in `[-1, 1]`.
    pub fn compute_cue_batch(&self, x: &Tensor, cfg: &AttractorConfig) -> Result<Tensor> {
        self.check_input(x)?;
        let x = x.clone().reshape(&[x.rows(), x.cols()])?;
        let input = match cfg.variant {
            Variant::Standard => x,
            Variant::ShiftedNonlinearity => x.map(|v| clip_atanh(v, cfg.input_clip_eps)),
        };
        let mut c = input.matmul(&self.w_in.transpose())?;
        add_bias_rows(&mut c, self.v_in.data());
        Ok(c)
    }

    pub fn compute_cue(&self, x: &[f64], cfg: &AttractorConfig) -> Result<Vec<f64>> {
        let x = Tensor::matrix(1, x.len(), x.to_vec());
        Ok(self.compute_cue_batch(&x, cfg)?.into_data())
    }

    fn step_batch(&self, w: &Tensor, a_prev: &Tensor, c: &Tensor, variant: Variant) -> Tensor {
        let mut out = match variant {
            Variant::Standard => a_prev.matmul(w),
            Variant::ShiftedNonlinearity => a_prev.map(tanh).matmul(w),
        }
        .expect("state shapes");
        for (o, cv) in out.data_mut().iter_mut().zip(c.data()) {
            *o += cv;
        }
        if variant == Variant::Standard {
            out.data_mut().iter_mut().for_each(|x| *x = tanh(*x));
        }
        out
    }

    /// One update of the dynamics.
    pub fn step(&self, a_prev: &[f64], c: &[f64], variant: Variant) -> Vec<f64> {
        let n = self.n();
        let a = Tensor::matrix(1, n, a_prev.to_vec());
        let c = Tensor::matrix(1, n, c.to_vec());
        self.step_batch(&self.effective_w(), &a, &c, variant).into_data()
    }

    pub fn readout_batch(&self, a: &Tensor, variant: Variant) -> Tensor {
        let a = a.clone().reshape(&[a.rows(), a.cols()]).expect("rank-2 view");
        let mut y = a.matmul(&self.w_out.transpose()).expect("state width");
        add_bias_rows(&mut y, self.v_out.data());
        match variant {
            Variant::Standard => y.map(|v| v.clamp(-1.0, 1.0)),
            Variant::ShiftedNonlinearity => y.map(tanh),
        }
    }

    pub fn readout(&self, a: &[f64], variant: Variant) -> Vec<f64> {
        let a = Tensor::matrix(1, a.len(), a.to_vec());
        self.readout_batch(&a, variant).into_data()
    }

    /// Runs the dynamics from `a₀ = 0` for one input.
    pub fn run(&self, x: &[f64], cfg: &AttractorConfig) -> Result<RunOutcome> {
        let x = Tensor::matrix(1, x.len(), x.to_vec());
        let out = self.run_batch(&x, cfg)?;
        Ok(RunOutcome {
            a_final: out.a_final.into_data(),
            output: out.outputs.into_data(),
            iterations: out.iterations[0],
            converged: out.converged[0],
        })
    }

    /// Runs every row of `x` independently. Under `ToConvergence` each row
    /// keeps the state and readout of its own stopping iteration.
    pub fn run_batch(&self, x: &Tensor, cfg: &AttractorConfig) -> Result<BatchOutcome> {
        cfg.validate()?;
        let c = self.compute_cue_batch(x, cfg)?;
        let (rows, n) = (c.rows(), self.n());
        let w = self.effective_w();
        let zero = Tensor::zeros(&[rows, n]);
        match cfg.run_mode {
            RunMode::FixedIterations(k) => {
                let mut a = zero;
                for _ in 0..k {
                    a = self.step_batch(&w, &a, &c, cfg.variant);
                }
                let outputs = self.readout_batch(&a, cfg.variant);
                Ok(BatchOutcome {
                    a_final: a,
                    outputs,
                    iterations: vec![k; rows],
                    converged: vec![true; rows],
                })
            }
            RunMode::ToConvergence { delta, max_iter } => {
                let probe = |a: &Tensor| {
                    if cfg.compare_hidden {
                        a.clone()
                    } else {
                        self.readout_batch(a, cfg.variant)
                    }
                };
                // history[k % 3] holds the probe at iteration k.
                let mut history = [probe(&zero), Tensor::zeros(&[0]), Tensor::zeros(&[0])];
                let mut a = zero;
                let mut a_final = Tensor::zeros(&[rows, n]);
                let mut iterations = vec![max_iter; rows];
                let mut converged = vec![false; rows];
                let mut remaining = rows;
                for k in 1..=max_iter {
                    a = self.step_batch(&w, &a, &c, cfg.variant);
                    let p = probe(&a);
                    if k >= 2 {
                        let old = &history[(k - 2) % 3];
                        for r in 0..rows {
                            if converged[r] {
                                continue;
                            }
                            let diff = p
                                .row(r)
                                .iter()
                                .zip(old.row(r))
                                .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
                            if diff < delta {
                                converged[r] = true;
                                iterations[r] = k;
                                a_final.data_mut()[r * n..(r + 1) * n].copy_from_slice(a.row(r));
                                remaining -= 1;
                            }
                        }
                    }
                    history[k % 3] = p;
                    if remaining == 0 {
                        break;
                    }
                }
                for r in 0..rows {
                    if !converged[r] {
                        a_final.data_mut()[r * n..(r + 1) * n].copy_from_slice(a.row(r));
                    }
                }
                let outputs = self.readout_batch(&a_final, cfg.variant);
                Ok(BatchOutcome {
                    a_final,
                    outputs,
                    iterations,
                    converged,
                })
            }
        }
    }

    /// Normalised denoising loss of the net on `batch`; returns
    /// `(loss, skipped)` where `skipped` counts zero-denominator examples.
    pub fn denoising_loss(
        &self,
        batch: &DenoisingBatch,
        cfg: &AttractorConfig,
    ) -> Result<(f64, usize)> {
        let inputs = batch.x_hat.map(tanh);
        let out = self.run_batch(&inputs, cfg)?;
        Ok(normalized_denoise(&out.outputs, &inputs, &batch.xi))
    }

    /// `λ ‖W‖²_F` on the effective symmetric matrix.
    pub fn ridge_penalty(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        lambda * self.effective_w().sq_norm()
    }

    /// Puts the parameters on `g` (tracked when `trainable`).
    pub fn register(&self, g: &mut Graph, trainable: bool) -> AttractorVars {
        let mut put = |t: &Tensor| {
            if trainable {
                g.param(t.clone())
            } else {
                g.constant(t.clone())
            }
        };
        AttractorVars {
            v: put(&self.v),
            w_in: put(&self.w_in),
            v_in: put(&self.v_in),
            w_out: put(&self.w_out),
            v_out: put(&self.v_out),
        }
    }
}

impl Parameterized for AttractorNet {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("attractor.v".into(), &self.v),
            ("attractor.w_in".into(), &self.w_in),
            ("attractor.v_in".into(), &self.v_in),
            ("attractor.w_out".into(), &self.w_out),
            ("attractor.v_out".into(), &self.v_out),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.v,
            &mut self.w_in,
            &mut self.v_in,
            &mut self.w_out,
            &mut self.v_out,
        ]
    }
}

/// `atanh((1-ε) x)` with the tape's guard against `|x| = 1`.
pub fn clip_atanh(x: f64, eps: f64) -> f64 {
    ((1.0 - eps) * x)
        .clamp(-1.0 + ATANH_GUARD, 1.0 - ATANH_GUARD)
        .atanh()
}

fn add_bias_rows(t: &mut Tensor, bias: &[f64]) {
    let n = bias.len();
    for row in t.data_mut().chunks_mut(n) {
        for (x, b) in row.iter_mut().zip(bias) {
            *x += b;
        }
    }
}

/// Per-row `‖y − ξ‖² / ‖x − ξ‖²` averaged over rows with a nonzero
/// denominator; `x` is the (tanh-domain) noisy input.
pub fn normalized_denoise(y: &Tensor, x: &Tensor, xi: &Tensor) -> (f64, usize) {
    let m = xi.cols();
    let mut total = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for r in 0..xi.rows() {
        let den: f64 = x.data()[r * m..(r + 1) * m]
            .iter()
            .zip(xi.row(r))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if den == 0.0 {
            skipped += 1;
            continue;
        }
        let num: f64 = y.data()[r * m..(r + 1) * m]
            .iter()
            .zip(xi.row(r))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        total += num / den;
        used += 1;
    }
    let loss = if used == 0 { 0.0 } else { total / used as f64 };
    (loss, skipped)
}

/// Builds `κ·A` pairs `(x̂, ξ)` with `x̂ = atanh(ξ) + η`, `η ~ N(0, σ² I)`.
pub fn make_denoising_batch(targets: &AttractorTargets, sigma: f64, seed: u64) -> Result<DenoisingBatch> {
    if !(sigma >= 0.0) {
        return Err(Error::Config(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut rng = rng_from_seed(seed);
    let m = targets.dim();
    let rows = targets.count() * targets.kappa;
    let mut x_hat = Vec::with_capacity(rows * m);
    let mut xi = Vec::with_capacity(rows * m);
    let normal = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    for target in &targets.xi {
        for _ in 0..targets.kappa {
            for &t in target {
                let noise = if sigma == 0.0 { 0.0 } else { normal.sample(&mut rng) };
                x_hat.push(t.atanh() + noise);
                xi.push(t);
            }
        }
    }
    Ok(DenoisingBatch {
        x_hat: Tensor::matrix(rows, m, x_hat),
        xi: Tensor::matrix(rows, m, xi),
    })
}

// ---------------------------------------------------------------------------
// Tape versions, used for training.

/// Effective symmetric `W` on the tape.
pub fn graph_effective_w(g: &mut Graph, vars: &AttractorVars) -> Result<Var> {
    let vt = g.transpose(vars.v)?;
    let sum = g.add(vars.v, vt)?;
    Ok(g.scale(sum, 0.5))
}

pub fn graph_cue(
    g: &mut Graph,
    vars: &AttractorVars,
    x: Var,
    cfg: &AttractorConfig,
) -> Result<Var> {
    let input = match cfg.variant {
        Variant::Standard => x,
        Variant::ShiftedNonlinearity => {
            let scaled = g.scale(x, 1.0 - cfg.input_clip_eps);
            g.atanh(scaled)
        }
    };
    let proj = g.matmul_t(input, vars.w_in)?;
    Ok(g.add_row(proj, vars.v_in)?)
}

pub fn graph_readout(g: &mut Graph, vars: &AttractorVars, a: Var, variant: Variant) -> Result<Var> {
    let proj = g.matmul_t(a, vars.w_out)?;
    let pre = g.add_row(proj, vars.v_out)?;
    Ok(match variant {
        Variant::Standard => g.clamp(pre, -1.0, 1.0),
        Variant::ShiftedNonlinearity => g.tanh(pre),
    })
}

/// Differentiable run of the dynamics on a batch `x` `[B, m]`.
///
/// Under `ToConvergence` the whole batch is iterated until every row passes
/// the two-step test (or `max_iter`); rows that passed earlier keep
/// iterating, which moves them by less than `delta`.
pub fn graph_run(g: &mut Graph, vars: &AttractorVars, x: Var, cfg: &AttractorConfig) -> Result<GraphRun> {
    let w = graph_effective_w(g, vars)?;
    let c = graph_cue(g, vars, x, cfg)?;
    // a₀ = 0, so the first update is W·0 + c.
    let mut a = match cfg.variant {
        Variant::Standard => g.tanh(c),
        Variant::ShiftedNonlinearity => c,
    };
    let next = |g: &mut Graph, a: Var| -> Result<Var> {
        let pre = match cfg.variant {
            Variant::Standard => g.matmul(a, w)?,
            Variant::ShiftedNonlinearity => {
                let t = g.tanh(a);
                g.matmul(t, w)?
            }
        };
        let s = g.add(pre, c)?;
        Ok(match cfg.variant {
            Variant::Standard => g.tanh(s),
            Variant::ShiftedNonlinearity => s,
        })
    };
    match cfg.run_mode {
        RunMode::FixedIterations(k) => {
            for _ in 1..k {
                a = next(g, a)?;
            }
            let output = graph_readout(g, vars, a, cfg.variant)?;
            Ok(GraphRun {
                a_final: a,
                output,
                iterations: k,
            })
        }
        RunMode::ToConvergence { delta, max_iter } => {
            let rows = g.value(x).rows();
            let n = g.value(vars.v).rows();
            let probe = |g: &mut Graph, a: Var| -> Result<(Var, Tensor)> {
                let y = graph_readout(g, vars, a, cfg.variant)?;
                let p = if cfg.compare_hidden { g.value(a).clone() } else { g.value(y).clone() };
                Ok((y, p))
            };
            let zero = g.constant(Tensor::zeros(&[rows, n]));
            let (_, p0) = probe(g, zero)?;
            let (mut y, p1) = probe(g, a)?;
            let mut history = vec![p0, p1];
            let mut k = 1;
            while k < max_iter {
                a = next(g, a)?;
                k += 1;
                let (yk, pk) = probe(g, a)?;
                y = yk;
                let done = all_within(&pk, &history[k - 2], delta);
                history.push(pk);
                if done {
                    break;
                }
            }
            Ok(GraphRun {
                a_final: a,
                output: y,
                iterations: k,
            })
        }
    }
}

/// True when every element of `a` is within `delta` of `b`.
fn all_within(a: &Tensor, b: &Tensor, delta: f64) -> bool {
    a.data().iter().zip(b.data()).all(|(u, v)| (u - v).abs() < delta)
}

/// Normalised denoising loss on the tape; returns `(loss, skipped)`.
pub fn graph_denoise_loss(
    g: &mut Graph,
    vars: &AttractorVars,
    batch: &DenoisingBatch,
    cfg: &AttractorConfig,
) -> Result<(Var, usize)> {
    let inputs = batch.x_hat.map(tanh);
    let rows = inputs.rows();
    let mut weights = vec![0.0; rows];
    let mut used = 0usize;
    for (r, w) in weights.iter_mut().enumerate() {
        let den: f64 = inputs
            .row(r)
            .iter()
            .zip(batch.xi.row(r))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if den > 0.0 {
            *w = 1.0 / den;
            used += 1;
        }
    }
    let skipped = rows - used;
    let x = g.constant(inputs);
    let run = graph_run(g, vars, x, cfg)?;
    let target = g.constant(batch.xi.clone());
    let diff = g.sub(run.output, target)?;
    let per_row = g.row_sq_norm(diff)?;
    let scale = if used == 0 { 0.0 } else { 1.0 / used as f64 };
    let w = g.constant(Tensor::matrix(rows, 1, weights.iter().map(|w| w * scale).collect()));
    let weighted = g.mul(per_row, w)?;
    Ok((g.sum(weighted), skipped))
}

/// `λ ‖W‖²_F` on the tape.
pub fn graph_ridge(g: &mut Graph, vars: &AttractorVars, lambda: f64) -> Result<Var> {
    let w = graph_effective_w(g, vars)?;
    let sq = g.sq_norm(w);
    Ok(g.scale(sq, lambda))
}
