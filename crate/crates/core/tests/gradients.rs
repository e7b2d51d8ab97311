use proptest::prelude::*;
use reify_core::attractor::{
    graph_denoise_loss, make_denoising_batch, AttractorConfig, AttractorNet, AttractorVars, RunMode, Variant,
};
use reify_core::ndcore::{grad_check, grad_check_many, sigmoid};
use reify_core::rnn::{CellKind, ModelVars, ReifierVars, SdrnnModel};
use reify_core::tasks::gen_attractor_targets;
use reify_core::{rng_from_seed, Graph, NdError, Tensor, Var};

type Op = fn(&mut Graph, Var, Var) -> Result<Var, NdError>;
type UnaryOp = fn(&mut Graph, Var) -> Result<Var, NdError>;

fn lift<T>(r: reify_core::Result<T>) -> Result<T, NdError> {
    r.map_err(|e| NdError::Domain(e.to_string()))
}

/// Fixed weighting so that every output coordinate matters to the loss.
fn weighted_sum(g: &mut Graph, y: Var) -> Result<Var, NdError> {
    let shape = g.value(y).shape().to_vec();
    let n: usize = shape.iter().product();
    let w = Tensor::new(shape, (0..n).map(|i| 0.7 + 0.13 * i as f64).collect())?;
    let w = g.constant(w);
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

#[test]
fn primitive_values() {
    let mut g = Graph::new();
    let z = g.constant(Tensor::scalar(0.0));
    let t = g.tanh(z);
    assert_eq!(g.value(t).data(), &[0.0]);

    let x = g.constant(Tensor::scalar(0.7));
    let t = g.tanh(x);
    let back = g.atanh(t);
    assert!((g.value(back).data()[0] - 0.7).abs() < 1e-14);

    let a = g.constant(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    let i = g.constant(Tensor::identity(3));
    let p = g.matmul(a, i).unwrap();
    assert_eq!(g.value(p), g.value(a));

    let s = g.constant(Tensor::vector(vec![-3.0, 0.0, 3.0]));
    let sg = g.sigmoid(s);
    for (v, x) in g.value(sg).data().iter().zip([-3.0f64, 0.0, 3.0]) {
        assert!((v - 1.0 / (1.0 + (-x).exp())).abs() < 1e-15);
    }
    assert_eq!(sigmoid(-1000.0), 0.0);
    assert_eq!(sigmoid(1000.0), 1.0);
}

#[test]
fn square_gradient() {
    let mut g = Graph::new();
    let x = g.param(Tensor::scalar(3.0));
    let y = g.mul(x, x).unwrap();
    g.backward(y).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[6.0]);
}

#[test]
fn mse_of_tanh_hand_derivative() {
    // L = (tanh(w x) − t)², dL/dw = 2 (tanh(w x) − t)(1 − tanh²(w x)) x
    let (w0, x0, t0) = (0.4f64, 1.5f64, 0.2f64);
    let mut g = Graph::new();
    let w = g.param(Tensor::matrix(1, 1, vec![w0]));
    let x = g.constant(Tensor::matrix(1, 1, vec![x0]));
    let t = g.constant(Tensor::matrix(1, 1, vec![t0]));
    let wx = g.matmul(w, x).unwrap();
    let y = g.tanh(wx);
    let l = g.mse(y, t).unwrap();
    g.backward(l).unwrap();
    let th = (w0 * x0).tanh();
    let expected = 2.0 * (th - t0) * (1.0 - th * th) * x0;
    assert!((g.grad(w).unwrap().data()[0] - expected).abs() < 1e-15);
}

#[test]
fn constants_and_detached_values_get_no_gradient() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.0, 2.0]));
    let c = g.constant(Tensor::vector(vec![3.0, 4.0]));
    let d = g.detach(x);
    let p = g.mul(d, c).unwrap();
    let q = g.mul(x, c).unwrap();
    let s = g.add(p, q).unwrap();
    let l = g.sum(s);
    g.backward(l).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[3.0, 4.0]);
    assert!(g.grad(c).is_none());
    assert!(g.grad(d).is_none());
    assert!(!g.is_tracked(d));
}

#[test]
fn gradients_accumulate_until_cleared() {
    let mut g = Graph::new();
    let x = g.param(Tensor::scalar(2.0));
    let y = g.mul(x, x).unwrap();
    g.backward(y).unwrap();
    g.backward(y).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[8.0]);
    g.zero_grad();
    assert!(g.grad(x).is_none());
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.0, 2.0]));
    assert!(matches!(g.backward(x), Err(NdError::NonScalarLoss(_))));
}

#[test]
fn backward_is_deterministic() {
    let run = || {
        let mut rng = rng_from_seed(5);
        let a = Tensor::randn(&[6, 4], 1.0, &mut rng);
        let b = Tensor::randn(&[4, 3], 1.0, &mut rng);
        let mut g = Graph::new();
        let (av, bv) = (g.param(a), g.param(b));
        let p = g.matmul(av, bv).unwrap();
        let t = g.tanh(p);
        let l = g.sq_norm(t);
        g.backward(l).unwrap();
        (g.grad(av).unwrap().clone(), g.grad(bv).unwrap().clone())
    };
    assert_eq!(run(), run());
}

fn binary_ops() -> Vec<(&'static str, Op)> {
    vec![
        ("matmul", |g, a, b| {
            let bt = g.transpose(b)?;
            g.matmul(a, bt)
        }),
        ("matmul_t", |g, a, b| g.matmul_t(a, b)),
        ("add", |g, a, b| g.add(a, b)),
        ("sub", |g, a, b| g.sub(a, b)),
        ("mul", |g, a, b| g.mul(a, b)),
        ("mse", |g, a, b| g.mse(a, b)),
        ("concat_cols", |g, a, b| g.concat_cols(a, b)),
    ]
}

fn unary_ops() -> Vec<(&'static str, UnaryOp)> {
    vec![
        ("tanh", |g, a| Ok(g.tanh(a))),
        ("atanh", |g, a| {
            let s = g.scale(a, 0.45);
            Ok(g.atanh(s))
        }),
        ("sigmoid", |g, a| Ok(g.sigmoid(a))),
        ("scale_shift", |g, a| Ok(g.scale_shift(a, -1.3, 0.4))),
        ("transpose", |g, a| g.transpose(a)),
        ("sum", |g, a| Ok(g.sum(a))),
        ("mean", |g, a| Ok(g.mean(a))),
        ("sq_norm", |g, a| Ok(g.sq_norm(a))),
        ("row_sq_norm", |g, a| g.row_sq_norm(a)),
    ]
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-1.999f64..1.999, rows * cols).prop_map(move |d| Tensor::matrix(rows, cols, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn unary_primitives_match_finite_differences(x in matrix(3, 4)) {
        for (name, op) in unary_ops() {
            let err = grad_check(|g, v| { let y = op(g, v)?; weighted_sum(g, y) }, &x, 1e-6).unwrap();
            prop_assert!(err < 1e-5, "{name}: {err}");
        }
    }

    #[test]
    fn binary_primitives_match_finite_differences(a in matrix(3, 4), b in matrix(3, 4)) {
        for (name, op) in binary_ops() {
            let report = grad_check_many(
                |g, v| { let y = op(g, v[0], v[1])?; weighted_sum(g, y) },
                &[a.clone(), b.clone()],
                1e-6,
            ).unwrap();
            prop_assert!(report.max_rel_error < 1e-5, "{name}: {report:?}");
        }
    }

    #[test]
    fn clamp_matches_away_from_kinks(x in matrix(3, 4)) {
        prop_assume!(x.data().iter().all(|v| (v.abs() - 1.0).abs() > 1e-3));
        let err = grad_check(|g, v| { let y = g.clamp(v, -1.0, 1.0); weighted_sum(g, y) }, &x, 1e-6).unwrap();
        prop_assert!(err < 1e-5, "clamp: {err}");
    }

    #[test]
    fn linf_matches_with_a_clear_maximum(x in matrix(3, 4)) {
        let mut mags: Vec<f64> = x.data().iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(mags[0] - mags[1] > 1e-3 && mags[0] > 1e-3);
        let err = grad_check(|g, v| Ok(g.linf(v)), &x, 1e-6).unwrap();
        prop_assert!(err < 1e-5, "linf: {err}");
    }

    #[test]
    fn bias_broadcast_matches(a in matrix(3, 4), b in prop::collection::vec(-1.999f64..1.999, 4)) {
        let report = grad_check_many(
            |g, v| { let y = g.add_row(v[0], v[1])?; let t = g.tanh(y); weighted_sum(g, t) },
            &[a.clone(), Tensor::vector(b.clone())],
            1e-6,
        ).unwrap();
        prop_assert!(report.max_rel_error < 1e-5, "{report:?}");
    }

    #[test]
    fn straight_through_routes_gradient_to_bypass(x in matrix(2, 3)) {
        // Forward uses tanh(x)³ but the gradient is that of x itself.
        let mut g = Graph::new();
        let v = g.param(x.clone());
        let t = g.tanh(v);
        let t2 = g.mul(t, t).unwrap();
        let cube = g.mul(t2, t).unwrap();
        let st = g.straight_through(cube, v).unwrap();
        let l = g.sum(st);
        g.backward(l).unwrap();
        prop_assert!(g.grad(v).unwrap().data().iter().all(|&d| d == 1.0));
        let expected: f64 = x.data().iter().map(|v| v.tanh().powi(3)).sum();
        prop_assert!((g.value(l).data()[0] - expected).abs() < 1e-12);
    }
}

fn attractor_inputs(net: &AttractorNet) -> Vec<Tensor> {
    vec![net.v.clone(), net.w_in.clone(), net.v_in.clone(), net.w_out.clone(), net.v_out.clone()]
}

fn vars_from(v: &[Var]) -> AttractorVars {
    AttractorVars {
        v: v[0],
        w_in: v[1],
        v_in: v[2],
        w_out: v[3],
        v_out: v[4],
    }
}

#[test]
fn unrolled_attractor_loss_gradients() {
    let targets = gen_attractor_targets(4, 6, 2, 11).unwrap();
    let batch = make_denoising_batch(&targets, 0.3, 12).unwrap();
    for variant in [Variant::Standard, Variant::ShiftedNonlinearity] {
        let mut net = AttractorNet::init(6, 8, 13);
        // Larger weights than the init so the dynamics are far from trivial.
        let mut rng = rng_from_seed(14);
        net.v = Tensor::randn(&[8, 8], 0.3, &mut rng);
        let cfg = AttractorConfig {
            variant,
            run_mode: RunMode::FixedIterations(5),
            ..AttractorConfig::default()
        };
        let report = grad_check_many(
            |g, v| Ok(lift(graph_denoise_loss(g, &vars_from(v), &batch, &cfg))?.0),
            &attractor_inputs(&net),
            1e-6,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{variant:?}: {report:?}");
    }
}

#[test]
fn three_step_sdrnn_gradients() {
    let cfg = AttractorConfig::default().with_iterations(2);
    for kind in [CellKind::Tanh, CellKind::Gru] {
        let model = SdrnnModel::new(kind, 2, 4, 1, 21).with_attractor(6, cfg.clone(), 21);
        let mut rng = rng_from_seed(22);
        let steps: Vec<Tensor> = (0..3).map(|_| Tensor::randn(&[5, 2], 1.0, &mut rng)).collect();
        let targets = Tensor::matrix(5, 1, vec![1.0, 0.0, 1.0, 1.0, 0.0]);
        let inputs: Vec<Tensor> = {
            use reify_core::params::Parameterized;
            model.snapshot()
        };
        let n_cell = inputs.len() - 7;
        let report = grad_check_many(
            |g, v| {
                let vars = ModelVars {
                    cell: v[..n_cell].to_vec(),
                    readout: [v[n_cell], v[n_cell + 1]],
                    reifier: ReifierVars::Attractor(vars_from(&v[n_cell + 2..])),
                };
                let trace = lift(model.graph_forward(g, &vars, &steps))?;
                let t = g.constant(targets.clone());
                g.mse(trace.prediction, t)
            },
            &inputs,
            1e-6,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{kind:?}: {report:?}");
    }
}
