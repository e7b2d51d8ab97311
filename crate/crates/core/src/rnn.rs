//! Recurrent cells and the state-reified recurrent model.
//!
//! At every step the cell produces `h_t` from the input and the previous
//! *reified* state, and the reifier maps `h_t` to `h̃_t`:
//!
//! ```text
//! h_t = cell(x_t, h̃_{t-1}),   h̃_t = reify(h_t),   ŷ = σ(W_o h̃_T + b_o)
//! ```
//!
//! The reifier is trained separately on a denoising loss whose targets are the
//! detached `h_t` (see [`reify_denoise_loss`]).

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::attractor::{
    clip_atanh, graph_denoise_loss, graph_ridge, graph_run, AttractorConfig, AttractorNet, AttractorVars,
    DenoisingBatch,
};
use crate::dae::{graph_reconstruct, graph_rec_loss, Dae, DaeVars};
use crate::params::Parameterized;
use crate::{derive_seed, rng_from_seed, Error, Graph, Result, Tensor, Var};

/// Rows per chunk when evaluating without gradients.
const EVAL_CHUNK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Tanh,
    Gru,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TanhCell {
    /// `[h, i]`
    pub w_xh: Tensor,
    /// `[h, h]`
    pub w_hh: Tensor,
    /// `[h]`
    pub b_h: Tensor,
}

/// Gated recurrent unit; each gate acts on `[x, h]` (or `[x, r⊙h]` for the
/// candidate) through an `[h, i+h]` matrix.
///
/// `h' = (1 − z)⊙h + z⊙n`, so an update gate of 0 keeps the previous state.
#[derive(Clone, Debug, PartialEq)]
pub struct GruCell {
    pub w_z: Tensor,
    pub b_z: Tensor,
    pub w_r: Tensor,
    pub b_r: Tensor,
    pub w_n: Tensor,
    pub b_n: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Tanh(TanhCell),
    Gru(GruCell),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Readout {
    /// `[o, h]`
    pub w: Tensor,
    /// `[o]`
    pub b: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reifier {
    None,
    Attractor { net: AttractorNet, cfg: AttractorConfig },
    Dae(Dae),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReifyMode {
    EveryStep,
    Disabled,
}

/// Which part of the model a parameter belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Cell,
    Readout,
    Reifier,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdrnnModel {
    pub cell: Cell,
    pub reifier: Reifier,
    pub readout: Readout,
    pub reify_mode: ReifyMode,
}

/// Graph handles for an [`SdrnnModel`], ordered like `params_mut`.
#[derive(Clone, Debug)]
pub struct ModelVars {
    pub cell: Vec<Var>,
    pub readout: [Var; 2],
    pub reifier: ReifierVars,
}

#[derive(Clone, Copy, Debug)]
pub enum ReifierVars {
    None,
    Attractor(AttractorVars),
    Dae(DaeVars),
}

impl ModelVars {
    pub fn all(&self) -> Vec<Var> {
        let mut out = self.cell.clone();
        out.extend(self.readout);
        match self.reifier {
            ReifierVars::None => {}
            ReifierVars::Attractor(a) => out.extend(a.all()),
            ReifierVars::Dae(d) => out.extend([d.w_enc, d.b_enc, d.w_dec, d.b_dec]),
        }
        out
    }
}

/// A forward pass recorded on a graph.
#[derive(Clone, Debug)]
pub struct GraphTrace {
    /// `[B, o]`, logistic outputs.
    pub prediction: Var,
    /// `h_t` per step.
    pub hidden: Vec<Var>,
    /// `h̃_t` per step.
    pub reified: Vec<Var>,
}

/// Forward-pass values without a tape.
#[derive(Clone, Debug)]
pub struct Trace {
    pub predictions: Tensor,
    pub hidden: Vec<Tensor>,
    pub reified: Vec<Tensor>,
}

impl TanhCell {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w_xh: Tensor::glorot(hidden, input, rng),
            w_hh: Tensor::glorot(hidden, hidden, rng),
            b_h: Tensor::zeros(&[hidden]),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_xh: Tensor::zeros(&[hidden, input]),
            w_hh: Tensor::zeros(&[hidden, hidden]),
            b_h: Tensor::zeros(&[hidden]),
        }
    }
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let w = input + hidden;
        Self {
            w_z: Tensor::glorot(hidden, w, rng),
            b_z: Tensor::zeros(&[hidden]),
            w_r: Tensor::glorot(hidden, w, rng),
            b_r: Tensor::zeros(&[hidden]),
            w_n: Tensor::glorot(hidden, w, rng),
            b_n: Tensor::zeros(&[hidden]),
        }
    }
}

impl Cell {
    pub fn new<R: Rng + ?Sized>(kind: CellKind, input: usize, hidden: usize, rng: &mut R) -> Self {
        match kind {
            CellKind::Tanh => Cell::Tanh(TanhCell::new(input, hidden, rng)),
            CellKind::Gru => Cell::Gru(GruCell::new(input, hidden, rng)),
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            Cell::Tanh(c) => c.b_h.len(),
            Cell::Gru(c) => c.b_z.len(),
        }
    }

    pub fn input(&self) -> usize {
        match self {
            Cell::Tanh(c) => c.w_xh.cols(),
            Cell::Gru(c) => c.w_z.cols() - c.b_z.len(),
        }
    }

    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Cell::Tanh(c) => vec![("cell.w_xh", &c.w_xh), ("cell.w_hh", &c.w_hh), ("cell.b_h", &c.b_h)],
            Cell::Gru(c) => vec![
                ("cell.w_z", &c.w_z),
                ("cell.b_z", &c.b_z),
                ("cell.w_r", &c.w_r),
                ("cell.b_r", &c.b_r),
                ("cell.w_n", &c.w_n),
                ("cell.b_n", &c.b_n),
            ],
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Cell::Tanh(c) => vec![&mut c.w_xh, &mut c.w_hh, &mut c.b_h],
            Cell::Gru(c) => vec![
                &mut c.w_z, &mut c.b_z, &mut c.w_r, &mut c.b_r, &mut c.w_n, &mut c.b_n,
            ],
        }
    }

    /// One step on the tape for a batch `x` `[B, i]`, `h_prev` `[B, h]`.
    pub fn graph_step(&self, g: &mut Graph, vars: &[Var], x: Var, h_prev: Var) -> Result<Var> {
        match self {
            Cell::Tanh(_) => {
                let a = g.matmul_t(x, vars[0])?;
                let b = g.matmul_t(h_prev, vars[1])?;
                let s = g.add(a, b)?;
                let s = g.add_row(s, vars[2])?;
                Ok(g.tanh(s))
            }
            Cell::Gru(_) => {
                let xh = g.concat_cols(x, h_prev)?;
                let gate = |g: &mut Graph, w: Var, b: Var| -> Result<Var> {
                    let p = g.matmul_t(xh, w)?;
                    let p = g.add_row(p, b)?;
                    Ok(g.sigmoid(p))
                };
                let z = gate(g, vars[0], vars[1])?;
                let r = gate(g, vars[2], vars[3])?;
                let rh = g.mul(r, h_prev)?;
                let xrh = g.concat_cols(x, rh)?;
                let n = g.matmul_t(xrh, vars[4])?;
                let n = g.add_row(n, vars[5])?;
                let n = g.tanh(n);
                let keep = g.scale_shift(z, -1.0, 1.0);
                let old = g.mul(keep, h_prev)?;
                let new = g.mul(z, n)?;
                Ok(g.add(old, new)?)
            }
        }
    }

    /// Single-example step without a tape.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let vars: Vec<Var> = self
            .tensors()
            .into_iter()
            .map(|(_, t)| g.constant(t.clone()))
            .collect();
        let xv = g.constant(Tensor::matrix(1, x.len(), x.to_vec()));
        let hv = g.constant(Tensor::matrix(1, h_prev.len(), h_prev.to_vec()));
        let h = self.graph_step(&mut g, &vars, xv, hv)?;
        Ok(g.value(h).data().to_vec())
    }
}

impl Readout {
    pub fn new<R: Rng + ?Sized>(hidden: usize, output: usize, rng: &mut R) -> Self {
        Self {
            w: Tensor::glorot(output, hidden, rng),
            b: Tensor::zeros(&[output]),
        }
    }
}

impl SdrnnModel {
    /// Cell and readout drawn from `seed`; no reifier.
    ///
    /// Models built from the same seed share these weights, which is what
    /// matched comparisons between variants rely on.
    pub fn new(kind: CellKind, input: usize, hidden: usize, output: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(derive_seed(seed, 1));
        let cell = Cell::new(kind, input, hidden, &mut rng);
        let readout = Readout::new(hidden, output, &mut rng);
        Self {
            cell,
            reifier: Reifier::None,
            readout,
            reify_mode: ReifyMode::EveryStep,
        }
    }

    /// Adds an attractor reifier with `n` units, initialised from `seed`.
    pub fn with_attractor(mut self, n: usize, cfg: AttractorConfig, seed: u64) -> Self {
        let net = AttractorNet::init(self.hidden(), n, derive_seed(seed, 2));
        self.reifier = Reifier::Attractor { net, cfg };
        self
    }

    pub fn with_dae(mut self, bottleneck: usize, sigma: f64, seed: u64) -> Self {
        let dae = Dae::new(self.hidden(), bottleneck, sigma, derive_seed(seed, 3));
        self.reifier = Reifier::Dae(dae);
        self
    }

    pub fn hidden(&self) -> usize {
        self.cell.hidden()
    }

    /// Corruption std used by the reifier's denoising loss.
    pub fn reifier_sigma(&self) -> Option<f64> {
        match &self.reifier {
            Reifier::None => None,
            Reifier::Attractor { cfg, .. } => Some(cfg.sigma),
            Reifier::Dae(d) => Some(d.sigma),
        }
    }

    pub fn has_reifier(&self) -> bool {
        !matches!(self.reifier, Reifier::None)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        let ok = match &self.reifier {
            Reifier::None => true,
            Reifier::Attractor { net, cfg } => {
                cfg.validate()?;
                net.m() == h
            }
            Reifier::Dae(d) => d.dim() == h,
        };
        if !ok || self.readout.w.cols() != h {
            return Err(Error::Config(format!(
                "reifier/readout width does not match hidden size {h}"
            )));
        }
        Ok(())
    }

    /// Group of each parameter, in `params_mut` order.
    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let mut out = vec![ParamGroup::Cell; self.cell.tensors().len()];
        out.extend([ParamGroup::Readout; 2]);
        let extra = match &self.reifier {
            Reifier::None => 0,
            Reifier::Attractor { .. } => 5,
            Reifier::Dae(_) => 4,
        };
        out.extend(std::iter::repeat_n(ParamGroup::Reifier, extra));
        out
    }

    pub fn register(&self, g: &mut Graph, trainable: bool) -> ModelVars {
        let mut put = |t: &Tensor| {
            if trainable {
                g.param(t.clone())
            } else {
                g.constant(t.clone())
            }
        };
        let cell = self.cell.tensors().into_iter().map(|(_, t)| put(t)).collect();
        let readout = [put(&self.readout.w), put(&self.readout.b)];
        let reifier = match &self.reifier {
            Reifier::None => ReifierVars::None,
            Reifier::Attractor { net, .. } => ReifierVars::Attractor(net.register(g, trainable)),
            Reifier::Dae(d) => ReifierVars::Dae(d.register(g, trainable)),
        };
        ModelVars {
            cell,
            readout,
            reifier,
        }
    }

    /// Applies the reifier to `h` `[B, h]` on the tape.
    pub fn graph_reify(&self, g: &mut Graph, vars: &ModelVars, h: Var) -> Result<Var> {
        if self.reify_mode == ReifyMode::Disabled {
            return Ok(h);
        }
        match (&self.reifier, vars.reifier) {
            (Reifier::Attractor { cfg, .. }, ReifierVars::Attractor(av)) => {
                Ok(graph_run(g, &av, h, cfg)?.output)
            }
            (Reifier::Dae(_), ReifierVars::Dae(dv)) => graph_reconstruct(g, &dv, h),
            _ => Ok(h),
        }
    }

    /// Forward pass over time-major inputs (`steps[t]` is `[B, i]`).
    pub fn graph_forward(&self, g: &mut Graph, vars: &ModelVars, steps: &[Tensor]) -> Result<GraphTrace> {
        let first = steps.first().ok_or(Error::Empty("sequence"))?;
        let batch = first.rows();
        let mut state = g.constant(Tensor::zeros(&[batch, self.hidden()]));
        let mut hidden = Vec::with_capacity(steps.len());
        let mut reified = Vec::with_capacity(steps.len());
        for x in steps {
            let xv = g.constant(x.clone());
            let h = self.cell.graph_step(g, &vars.cell, xv, state)?;
            let r = self.graph_reify(g, vars, h)?;
            hidden.push(h);
            reified.push(r);
            state = r;
        }
        let logits = g.matmul_t(state, vars.readout[0])?;
        let logits = g.add_row(logits, vars.readout[1])?;
        let prediction = g.sigmoid(logits);
        Ok(GraphTrace {
            prediction,
            hidden,
            reified,
        })
    }

    /// Untracked forward pass, chunked over rows.
    pub fn run(&self, steps: &[Tensor]) -> Result<Trace> {
        let first = steps.first().ok_or(Error::Empty("sequence"))?;
        let rows = first.rows();
        let mut predictions = Vec::new();
        let mut hidden: Vec<Vec<f64>> = vec![Vec::new(); steps.len()];
        let mut reified: Vec<Vec<f64>> = vec![Vec::new(); steps.len()];
        let mut out_cols = 0;
        let mut start = 0;
        while start < rows {
            let end = (start + EVAL_CHUNK).min(rows);
            let chunk: Vec<Tensor> = steps.iter().map(|s| slice_rows(s, start, end)).collect();
            let mut g = Graph::new();
            let vars = self.register(&mut g, false);
            let trace = self.graph_forward(&mut g, &vars, &chunk)?;
            let p = g.value(trace.prediction);
            out_cols = p.cols();
            predictions.extend_from_slice(p.data());
            for t in 0..steps.len() {
                hidden[t].extend_from_slice(g.value(trace.hidden[t]).data());
                reified[t].extend_from_slice(g.value(trace.reified[t]).data());
            }
            start = end;
        }
        let h = self.hidden();
        Ok(Trace {
            predictions: Tensor::matrix(rows, out_cols, predictions),
            hidden: hidden.into_iter().map(|d| Tensor::matrix(rows, h, d)).collect(),
            reified: reified.into_iter().map(|d| Tensor::matrix(rows, h, d)).collect(),
        })
    }

    /// Predictions for a single sequence of input vectors.
    pub fn sdrnn_forward(&self, sequence: &[Vec<f64>]) -> Result<Trace> {
        let steps: Vec<Tensor> = sequence
            .iter()
            .map(|x| Tensor::matrix(1, x.len(), x.clone()))
            .collect();
        self.run(&steps)
    }
}

impl Parameterized for SdrnnModel {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = self
            .cell
            .tensors()
            .into_iter()
            .map(|(n, t)| (n.to_string(), t))
            .collect();
        out.push(("readout.w".into(), &self.readout.w));
        out.push(("readout.b".into(), &self.readout.b));
        match &self.reifier {
            Reifier::None => {}
            Reifier::Attractor { net, .. } => out.extend(net.named_params()),
            Reifier::Dae(d) => out.extend(d.named_params()),
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.cell.tensors_mut();
        out.push(&mut self.readout.w);
        out.push(&mut self.readout.b);
        match &mut self.reifier {
            Reifier::None => {}
            Reifier::Attractor { net, .. } => out.extend(net.params_mut()),
            Reifier::Dae(d) => out.extend(d.params_mut()),
        }
        out
    }
}

pub fn slice_rows(t: &Tensor, start: usize, end: usize) -> Tensor {
    let c = t.cols();
    Tensor::matrix(end - start, c, t.data()[start * c..end * c].to_vec())
}

/// Stacks the hidden states of every step into one `[T·B, h]` matrix.
pub fn stack_states(states: &[Tensor]) -> Tensor {
    let cols = states.first().map_or(0, Tensor::cols);
    let rows: usize = states.iter().map(Tensor::rows).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for s in states {
        data.extend_from_slice(s.data());
    }
    Tensor::matrix(rows, cols, data)
}

/// The reifier's denoising loss on a fresh graph, given the hidden states
/// `h_t` of a forward pass (used as detached targets).
///
/// Attractor: noisy inputs `atanh((1-ε)h) + η` and the normalised loss, plus
/// the ridge term when `ridge_lambda > 0`.
/// DAE: `mean ‖r(h + a) − h‖²`. Returns the graph, the loss node and the
/// reifier's parameter handles in `params_mut` order.
pub fn reify_denoise_loss(
    model: &SdrnnModel,
    hidden: &[Tensor],
    sigma: f64,
    seed: u64,
) -> Result<(Graph, Var, Vec<Var>)> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("denoising sigma must be > 0, got {sigma}")));
    }
    let targets = stack_states(hidden);
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma > 0");
    let mut g = Graph::new();
    match &model.reifier {
        Reifier::None => Err(Error::MissingReifier),
        Reifier::Attractor { net, cfg } => {
            let x_hat = targets.map(|h| clip_atanh(h, cfg.input_clip_eps) + normal.sample(&mut rng));
            let batch = DenoisingBatch {
                x_hat,
                xi: targets,
            };
            let vars = net.register(&mut g, true);
            let (mut loss, _) = graph_denoise_loss(&mut g, &vars, &batch, cfg)?;
            if cfg.ridge_lambda > 0.0 {
                let ridge = graph_ridge(&mut g, &vars, cfg.ridge_lambda)?;
                loss = g.add(loss, ridge)?;
            }
            Ok((g, loss, vars.all().to_vec()))
        }
        Reifier::Dae(dae) => {
            let noisy = targets.map(|h| h + normal.sample(&mut rng));
            let vars = dae.register(&mut g, true);
            let nv = g.constant(noisy);
            let tv = g.constant(targets);
            let loss = graph_rec_loss(&mut g, &vars, nv, tv)?;
            Ok((g, loss, vec![vars.w_enc, vars.b_enc, vars.w_dec, vars.b_dec]))
        }
    }
}

/// Shannon entropy of the joint discretised state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entropy {
    pub nats: f64,
    pub bits: f64,
    pub distinct_states: usize,
}

/// Bins per hidden unit over `[-1, 1]`.
pub const ENTROPY_BINS: usize = 8;

/// Discretises every unit into 8 equal intervals of `[-1, 1]` and measures the
/// empirical entropy of the joint bin vector over all rows of all `states`.
/// Counts are summed in key order so the result is reproducible bit for bit.
pub fn hidden_entropy(states: &[Tensor]) -> Result<Entropy> {
    let mut counts: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    let mut total = 0usize;
    for s in states {
        for r in 0..s.rows() {
            let key: Vec<u8> = s.row(r).iter().map(|&v| bin_of(v)).collect();
            *counts.entry(key).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Empty("hidden state trace"));
    }
    let n = total as f64;
    let nats = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum::<f64>();
    Ok(Entropy {
        nats,
        bits: nats / std::f64::consts::LN_2,
        distinct_states: counts.len(),
    })
}

fn bin_of(v: f64) -> u8 {
    let scaled = ((v + 1.0) / 2.0 * ENTROPY_BINS as f64).floor();
    scaled.clamp(0.0, (ENTROPY_BINS - 1) as f64) as u8
}
