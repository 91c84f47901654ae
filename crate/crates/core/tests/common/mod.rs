//! Independent oracles shared by the integration tests and the acceptance
//! harness. Each check returns a one-line summary on success and a
//! description of the first violation on failure.

#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slimseiz::eeg_io::{parse_edf, write_edf, EdfError};
use slimseiz::mlcore::{pca_fit, smote, tree_fit, Components, Matrix, TreeNode};
use slimseiz::model::{ModelConfig, Model, TrainState};
use slimseiz::nn::{ssm_scan, OptimState, SsmVars, Tape, Tensor, Var};

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(r: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

fn tensor<T: slimseiz::Real>(shape: &[usize], data: &[f64]) -> Tensor<T> {
    Tensor::new(shape.to_vec(), data.iter().map(|&v| T::lit(v)).collect()).unwrap()
}

/// `max |a - b| / max |b|`, the error scaled by the oracle's magnitude.
pub fn scaled_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn softplus(x: f64) -> f64 {
    if x > 20.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

// ---------------------------------------------------------------- SSM

struct SsmCase {
    b: usize,
    l: usize,
    di: usize,
    n: usize,
    r: usize,
    x: Vec<f64>,
    dt_down: Vec<f64>,
    dt_w: Vec<f64>,
    dt_b: Vec<f64>,
    proj_b: Vec<f64>,
    proj_c: Vec<f64>,
    a_log: Vec<f64>,
    d: Vec<f64>,
}

/// Values are drawn as f32 so the single-precision run sees the same numbers.
fn ssm_case(r: &mut ChaCha8Rng) -> SsmCase {
    let (b, l, di, n) = (r.random_range(1..=4), r.random_range(1..=32), r.random_range(1..=8), r.random_range(1..=4));
    let rank = r.random_range(1..=di.min(4));
    let mut u = |len: usize, lo: f64, hi: f64| -> Vec<f64> { uniform(r, len, lo, hi).into_iter().map(|v| v as f32 as f64).collect() };
    SsmCase {
        x: u(b * l * di, -1.0, 1.0),
        dt_down: u(rank * di, -0.5, 0.5),
        dt_w: u(di * rank, -0.5, 0.5),
        dt_b: u(di, -1.0, 0.5),
        proj_b: u(n * di, -0.7, 0.7),
        proj_c: u(n * di, -0.7, 0.7),
        a_log: u(di * n, -1.0, 1.5),
        d: u(di, -1.0, 1.0),
        b,
        l,
        di,
        n,
        r: rank,
    }
}

/// Step-by-step recurrence in f64, recomputing every projection per time step.
fn ssm_reference(c: &SsmCase) -> Vec<f64> {
    let mut y = vec![0.0; c.b * c.l * c.di];
    for b in 0..c.b {
        let mut h = vec![vec![0.0f64; c.n]; c.di];
        for t in 0..c.l {
            let xt = &c.x[(b * c.l + t) * c.di..][..c.di];
            let low: Vec<f64> = (0..c.r).map(|k| (0..c.di).map(|j| c.dt_down[k * c.di + j] * xt[j]).sum()).collect();
            let bt: Vec<f64> = (0..c.n).map(|s| (0..c.di).map(|j| c.proj_b[s * c.di + j] * xt[j]).sum()).collect();
            let ct: Vec<f64> = (0..c.n).map(|s| (0..c.di).map(|j| c.proj_c[s * c.di + j] * xt[j]).sum()).collect();
            for d in 0..c.di {
                let pre = c.dt_b[d] + (0..c.r).map(|k| c.dt_w[d * c.r + k] * low[k]).sum::<f64>();
                let delta = softplus(pre);
                let mut acc = c.d[d] * xt[d];
                for s in 0..c.n {
                    let a = -c.a_log[d * c.n + s].exp();
                    h[d][s] = (delta * a).exp() * h[d][s] + delta * bt[s] * xt[d];
                    acc += ct[s] * h[d][s];
                }
                y[(b * c.l + t) * c.di + d] = acc;
            }
        }
    }
    y
}

fn ssm_run<T: slimseiz::Real>(c: &SsmCase) -> Vec<f64> {
    let mut tape = Tape::<T>::new();
    let mut leaf = |shape: &[usize], v: &[f64]| tape.leaf(tensor::<T>(shape, v), false);
    let x = leaf(&[c.b, c.l, c.di], &c.x);
    let vars = SsmVars {
        dt_down: leaf(&[c.r, c.di], &c.dt_down),
        dt_proj_w: leaf(&[c.di, c.r], &c.dt_w),
        dt_proj_b: leaf(&[c.di], &c.dt_b),
        proj_b: leaf(&[c.n, c.di], &c.proj_b),
        proj_c: leaf(&[c.n, c.di], &c.proj_c),
        a_log: leaf(&[c.di, c.n], &c.a_log),
        d: leaf(&[c.di], &c.d),
    };
    let y = ssm_scan(&mut tape, x, &vars).unwrap();
    tape.value(y).data().iter().map(|v| v.as_f64()).collect()
}

/// 100 random instances in the training precision (f32) against the f64
/// step-by-step recurrence.
pub fn ssm_oracle() -> Check {
    let mut r = rng(0x55a);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let c = ssm_case(&mut r);
        let expect = ssm_reference(&c);
        let err = scaled_err(&ssm_run::<f32>(&c), &expect);
        let err64 = scaled_err(&ssm_run::<f64>(&c), &expect);
        worst = worst.max(err).max(err64);
        if err >= 1e-5 || err64 >= 1e-5 {
            return Err(format!(
                "instance {i} (B={} L={} D={} N={}): rel err f32 {err:.2e}, f64 {err64:.2e}",
                c.b, c.l, c.di, c.n
            ));
        }
    }
    Ok(format!("100 instances, max rel err {worst:.2e}"))
}

// ---------------------------------------------------------------- gradients

/// Checks every input marked trainable of a tape-built op against central
/// differences of `sum(op(inputs) ⊙ R)` in f64. Returns the worst error.
pub fn grad_check_op(
    inputs: &[(Vec<usize>, Vec<f64>, bool)],
    build: &dyn Fn(&mut Tape<f64>, &[Var]) -> Var,
    weights_seed: u64,
) -> f64 {
    let eval = |vals: &[Vec<f64>], grads: bool| -> (f64, Vec<Option<Vec<f64>>>) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs
            .iter()
            .zip(vals)
            .map(|((s, _, g), v)| tape.leaf(tensor::<f64>(s, v), *g && grads))
            .collect();
        let out = build(&mut tape, &vars);
        let shape = tape.value(out).shape().to_vec();
        let n: usize = tape.value(out).len();
        let w = tape.leaf(tensor::<f64>(&shape, &uniform(&mut rng(weights_seed), n, -1.0, 1.0)), false);
        let prod = tape.mul(out, w).unwrap();
        let loss = tape.sum(prod);
        let value = tape.value(loss).item();
        if !grads {
            return (value, vec![]);
        }
        let mut g = tape.backward(loss).unwrap();
        (value, vars.iter().map(|&v| g.take(v)).collect())
    };
    let base: Vec<Vec<f64>> = inputs.iter().map(|(_, v, _)| v.clone()).collect();
    let (_, analytic) = eval(&base, true);
    let mut worst = 0.0f64;
    for (k, (_, v, trainable)) in inputs.iter().enumerate() {
        if !trainable {
            continue;
        }
        let a = analytic[k].clone().unwrap_or_else(|| vec![0.0; v.len()]);
        let mut numeric = vec![0.0; v.len()];
        for i in 0..v.len() {
            let h = 1e-5 * v[i].abs().max(1.0);
            let mut p = base.clone();
            p[k][i] += h;
            let up = eval(&p, false).0;
            p[k][i] -= 2.0 * h;
            let down = eval(&p, false).0;
            numeric[i] = (up - down) / (2.0 * h);
        }
        worst = worst.max(scaled_err(&a, &numeric));
    }
    worst
}

type OpCase = (Vec<(Vec<usize>, Vec<f64>, bool)>, Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Var>);

/// Away from zero so a finite step never crosses the ReLU kink.
fn off_kink(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = r.random_range(0.05..1.5);
            if r.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect()
}

fn op_case(op: &str, r: &mut ChaCha8Rng) -> OpCase {
    let u = |r: &mut ChaCha8Rng, n: usize| uniform(r, n, -1.0, 1.0);
    let (b, c, l) = (2usize, 3usize, 7usize);
    match op {
        "conv1d" => {
            let mut r2 = rng(u(r, 1)[0].to_bits());
            let (ci, co, k) = (r2.random_range(1..=3), r2.random_range(1..=3), r2.random_range(1..=5));
            let (stride, pad) = (r2.random_range(1..=3), r2.random_range(0..=2));
            let len = k + r2.random_range(0..6);
            let bias = r2.random::<bool>();
            (
                vec![
                    (vec![b, ci, len], u(r, b * ci * len), true),
                    (vec![co, ci, k], u(r, co * ci * k), true),
                    (vec![co], u(r, co), true),
                ],
                Box::new(move |t, v| t.conv1d(v[0], v[1], if bias { Some(v[2]) } else { None }, stride, pad).unwrap()),
            )
        }
        "maxpool1d" => (vec![(vec![b, c, 8], u(r, b * c * 8), true)], Box::new(|t, v| t.maxpool1d(v[0], 3, 2).unwrap())),
        "global_avg_pool" => (vec![(vec![b, c, l], u(r, b * c * l), true)], Box::new(|t, v| t.global_avg_pool(v[0]).unwrap())),
        "linear2" => (
            vec![(vec![b, 4], u(r, b * 4), true), (vec![3, 4], u(r, 12), true), (vec![3], u(r, 3), true)],
            Box::new(|t, v| t.linear(v[0], v[1], Some(v[2])).unwrap()),
        ),
        "linear3" => (
            vec![(vec![b, l, 4], u(r, b * l * 4), true), (vec![5, 4], u(r, 20), true)],
            Box::new(|t, v| t.linear(v[0], v[1], None).unwrap()),
        ),
        "relu" => {
            let x = off_kink(r, b * c * l);
            (vec![(vec![b, c, l], x, true)], Box::new(|t, v| t.relu(v[0])))
        }
        "silu" => (vec![(vec![b, c, l], uniform(r, b * c * l, -4.0, 4.0), true)], Box::new(|t, v| t.silu(v[0]))),
        "softplus" => (vec![(vec![b, c, l], uniform(r, b * c * l, -4.0, 4.0), true)], Box::new(|t, v| t.softplus(v[0]))),
        "add" => (
            vec![(vec![b, c], u(r, b * c), true), (vec![b, c], u(r, b * c), true)],
            Box::new(|t, v| t.add(v[0], v[1]).unwrap()),
        ),
        "mul" => (
            vec![(vec![b, c], u(r, b * c), true), (vec![b, c], u(r, b * c), true)],
            Box::new(|t, v| t.mul(v[0], v[1]).unwrap()),
        ),
        "add_scaled" => (
            vec![(vec![b, c], u(r, b * c), true), (vec![b, c], u(r, b * c), true)],
            Box::new(|t, v| t.add_scaled(v[0], v[1], 0.3).unwrap()),
        ),
        "sum" => (vec![(vec![b, c, l], u(r, b * c * l), true)], Box::new(|t, v| t.sum(v[0]))),
        "transpose12" => (vec![(vec![b, c, l], u(r, b * c * l), true)], Box::new(|t, v| t.transpose12(v[0]).unwrap())),
        "dw_causal_conv" => {
            let k = 1 + (u(r, 1)[0].abs() * 3.99) as usize;
            (
                vec![(vec![b, l, c], u(r, b * l * c), true), (vec![c, k], u(r, c * k), true), (vec![c], u(r, c), true)],
                Box::new(|t, v| t.dw_causal_conv(v[0], v[1], v[2]).unwrap()),
            )
        }
        "selective_scan" => {
            let (di, n) = (3usize, 2usize);
            let delta = uniform(r, b * l * di, 0.05, 1.0);
            (
                vec![
                    (vec![b, l, di], u(r, b * l * di), true),
                    (vec![b, l, di], delta, true),
                    (vec![di, n], u(r, di * n), true),
                    (vec![b, l, n], u(r, b * l * n), true),
                    (vec![b, l, n], u(r, b * l * n), true),
                    (vec![di], u(r, di), true),
                ],
                Box::new(|t, v| t.selective_scan(v[0], v[1], v[2], v[3], v[4], v[5]).unwrap()),
            )
        }
        "cross_entropy" => {
            let labels: Vec<usize> = (0..4).map(|i| i % 2).collect();
            (
                vec![(vec![4, 2], uniform(r, 8, -3.0, 3.0), true)],
                Box::new(move |t, v| t.cross_entropy(v[0], &labels).unwrap()),
            )
        }
        "supcon" => {
            let tau = [0.07, 0.2, 0.5][r.random_range(0..3)];
            let labels = vec![0, 1, 0, 1, 1, 0];
            (
                vec![(vec![6, 4], u(r, 24), true)],
                Box::new(move |t, v| t.supcon(v[0], &labels, tau).unwrap()),
            )
        }
        other => panic!("unknown op {other}"),
    }
}

pub const GRAD_OPS: [&str; 18] = [
    "conv1d",
    "maxpool1d",
    "global_avg_pool",
    "linear2",
    "linear3",
    "relu",
    "silu",
    "softplus",
    "add",
    "mul",
    "add_scaled",
    "sum",
    "transpose12",
    "dw_causal_conv",
    "selective_scan",
    "cross_entropy",
    "supcon",
    "mamba_block",
];

fn mamba_case(r: &mut ChaCha8Rng) -> OpCase {
    use slimseiz::nn::{mamba_block, MambaConfig, MambaVars};
    let cfg = MambaConfig { d_model: 3, d_inner: 4, d_state: 2, dt_rank: 2, conv_kernel: 3, gate: r.random::<bool>() };
    let shapes = cfg.param_shapes();
    let mut inputs = vec![(vec![2, 5, 3], uniform(r, 30, -1.0, 1.0), true)];
    for (_, s) in &shapes {
        inputs.push((s.clone(), uniform(r, s.iter().product(), -0.6, 0.6), true));
    }
    let names: Vec<&'static str> = shapes.iter().map(|(n, _)| *n).collect();
    (
        inputs,
        Box::new(move |t, v| {
            let map: HashMap<&str, Var> = names.iter().zip(&v[1..]).map(|(n, &x)| (*n, x)).collect();
            let mv = MambaVars::resolve(&cfg, |n| map[n]);
            mamba_block(t, v[0], &mv).unwrap()
        }),
    )
}

/// Worst scaled error of one op over `trials` random draws.
pub fn grad_check_named(op: &str, trials: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..trials)
        .map(|trial| {
            let (inputs, build) = if op == "mamba_block" { mamba_case(&mut r) } else { op_case(op, &mut r) };
            grad_check_op(&inputs, build.as_ref(), seed ^ trial as u64)
        })
        .fold(0.0, f64::max)
}

/// Each op: 50 random trials in f64, scaled error below 1e-5.
pub fn op_gradients() -> Check {
    let mut parts = Vec::new();
    for (i, op) in GRAD_OPS.iter().enumerate() {
        let err = grad_check_named(op, 50, 1000 + i as u64);
        if !(err < 1e-5) {
            return Err(format!("{op}: scaled error {err:.2e} >= 1e-5"));
        }
        parts.push(err);
    }
    Ok(format!("{} ops x 50 trials, max err {:.2e}", GRAD_OPS.len(), parts.iter().fold(0.0f64, |a, &b| a.max(b))))
}

fn tiny_batch(seed: u64) -> (Vec<f32>, Vec<usize>) {
    let cfg = ModelConfig::tiny();
    let n = 6;
    let mut r = rng(seed);
    let raw = (0..n * cfg.in_channels * cfg.input_len).map(|_| r.random_range(-2.0f32..2.0)).collect();
    (raw, (0..n).map(|i| i % 2).collect())
}

fn as_f64_state(st: &TrainState<f32>) -> TrainState<f64> {
    let cast = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
    let params = st.model.params.cast::<f64>();
    let optim = OptimState::new(&params, st.model.config.lr);
    TrainState {
        model: Model {
            config: st.model.config.clone(),
            params,
            norm_mean: cast(&st.model.norm_mean),
            norm_std: cast(&st.model.norm_std),
        },
        optim,
        epoch: 0,
        seed: st.seed,
    }
}

/// Whole tiny model, loss CE + SupCon. Analytic gradients in f32 and f64 are
/// compared per parameter tensor with central differences of the f64 loss.
pub fn model_gradients(seed: u64) -> Result<(f64, f64), String> {
    let (raw, labels) = tiny_batch(seed);
    let cfg = ModelConfig::tiny();
    let mut st32 = TrainState::<f32>::new(&cfg, seed, slimseiz::model::TrainData { raw: &raw, labels: &labels })
        .map_err(|e| e.to_string())?;
    // zero biases put ReLU inputs exactly on the kink; move to a generic point
    let mut r = rng(seed ^ 0xb1a5);
    let biases: Vec<String> = st32.model.params.names().into_iter().filter(|n| n.ends_with(".b")).map(String::from).collect();
    for name in &biases {
        for v in st32.model.params.get_mut(name).unwrap().data_mut() {
            *v = r.random_range(-0.1f32..0.1);
        }
    }
    let st64 = as_f64_state(&st32);
    let (_, _, g32) = st32.loss_and_grads(&raw, &labels).map_err(|e| e.to_string())?;
    let (_, _, g64) = st64.loss_and_grads(&raw, &labels).map_err(|e| e.to_string())?;
    let names = st64.model.params.names();
    let (mut w32, mut w64) = (0.0f64, 0.0f64);
    for (k, name) in names.iter().enumerate() {
        let len = st64.model.params.get(name).unwrap().len();
        let a32: Vec<f64> = g32[k].iter().map(|&v| v as f64).collect();
        let (mut e32, mut e64) = (f64::INFINITY, f64::INFINITY);
        // Large steps can cross a ReLU kink; small ones drown the ~1e-7
        // gradients of the Δ path in round-off. Keep the best step.
        for step in [1e-4, 1e-5, 1e-6] {
            let mut numeric = vec![0.0; len];
            for i in 0..len {
                let mut probe = st64.clone();
                let v = probe.model.params.get(name).unwrap().data()[i];
                let h = step * v.abs().max(1.0);
                probe.model.params.get_mut(name).unwrap().data_mut()[i] = v + h;
                let up = probe.loss_and_grads(&raw, &labels).map_err(|e| e.to_string())?.0;
                probe.model.params.get_mut(name).unwrap().data_mut()[i] = v - h;
                let down = probe.loss_and_grads(&raw, &labels).map_err(|e| e.to_string())?.0;
                numeric[i] = (up - down) / (2.0 * h);
            }
            e32 = e32.min(scaled_err(&a32, &numeric));
            e64 = e64.min(scaled_err(&g64[k], &numeric));
        }
        if e32 >= 1e-2 || e64 >= 1e-4 {
            return Err(format!("{name}: f32 err {e32:.2e}, f64 err {e64:.2e}"));
        }
        w32 = w32.max(e32);
        w64 = w64.max(e64);
    }
    Ok((w32, w64))
}

pub fn gradient_suite() -> Check {
    let ops = op_gradients()?;
    let mut w = (0.0f64, 0.0f64);
    for seed in 0..3 {
        let (a, b) = model_gradients(seed)?;
        w = (w.0.max(a), w.1.max(b));
    }
    Ok(format!("{ops}; tiny model 3 draws, f32 err {:.2e} (< 1e-2), f64 err {:.2e} (< 1e-4)", w.0, w.1))
}

// ---------------------------------------------------------------- mlcore

/// PCA spectra against a dense `nalgebra` eigendecomposition of the sample
/// covariance, covering both the covariance and the Gram route.
pub fn pca_eigenvalues() -> Check {
    let mut r = rng(71);
    let mut worst = 0.0f64;
    for trial in 0..30 {
        let n = r.random_range(3..60);
        let d = r.random_range(2..40);
        // correlated columns so the spectrum is spread out
        let mix = uniform(&mut r, d * d, -1.0, 1.0);
        let base = uniform(&mut r, n * d, -1.0, 1.0);
        let mut x = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                x[i * d + j] = (0..d).map(|k| base[i * d + k] * mix[k * d + j] * (1.0 + k as f64)).sum::<f64>();
            }
        }
        let xm = DMatrix::from_row_slice(n, d, &x);
        let mean = xm.row_mean();
        let mut xc = xm.clone();
        for mut row in xc.row_iter_mut() {
            row -= &mean;
        }
        let cov = xc.transpose() * &xc / (n as f64 - 1.0);
        let mut expect: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        expect.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let keep = (n - 1).min(d);
        let model = pca_fit(&Matrix::from_vec(n, d, x.clone()), Components::Fixed(keep)).map_err(|e| e.to_string())?;
        let top = expect[0];
        for (k, (&got, &want)) in model.explained_variance.iter().zip(&expect).enumerate() {
            // relative to each eigenvalue, floored at round-off of the largest
            let err = (got - want).abs() / want.abs().max(top * 1e-9);
            worst = worst.max(err);
            if err >= 1e-6 {
                return Err(format!("trial {trial} ({n}x{d}) eigenvalue {k}: {got} vs {want}"));
            }
        }
        let trace: f64 = expect.iter().sum();
        if (model.total_variance - trace).abs() > 1e-9 * trace {
            return Err(format!("trial {trial}: total variance {} vs {trace}", model.total_variance));
        }
    }
    Ok(format!("30 matrices, max rel err {worst:.2e}"))
}

fn gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    1.0 - (c[0] as f64 / n).powi(2) - (c[1] as f64 / n).powi(2)
}

/// Every (feature, threshold) pair enumerated from scratch; the first
/// strictly best split in (feature, ascending threshold) order.
fn exhaustive_root(x: &[[f64; 2]], y: &[u8]) -> (usize, f64, f64) {
    let n = y.len();
    let total = [y.iter().filter(|&&v| v == 0).count(), y.iter().filter(|&&v| v == 1).count()];
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..2 {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) * 0.5;
            let mut left = [0usize; 2];
            for (row, &lab) in x.iter().zip(y) {
                if row[f] <= t {
                    left[lab as usize] += 1;
                }
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let (nl, nr) = (left[0] + left[1], right[0] + right[1]);
            let gain = gini(total) - (nl as f64 * gini(left) + nr as f64 * gini(right)) / n as f64;
            if best.is_none_or(|b| gain > b.2 + 1e-12) {
                best = Some((f, t, gain));
            }
        }
    }
    best.unwrap()
}

pub fn cart_root_splits() -> Check {
    let mut r = rng(5);
    for trial in 0..50 {
        let x: Vec<[f64; 2]> = (0..20).map(|_| [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
        let mut y: Vec<u8> = (0..20).map(|_| r.random_range(0..2)).collect();
        y[0] = 0;
        y[1] = 1;
        let (f, t, gain) = exhaustive_root(&x, &y);
        let m = Matrix::from_vec(20, 2, x.iter().flatten().copied().collect());
        let tree = tree_fit(&m, &y, 1, 1).map_err(|e| e.to_string())?;
        match tree.root {
            TreeNode::Split { feature, threshold, gain: g, .. } => {
                if feature != f || (threshold - t).abs() > 1e-12 || (g - gain).abs() > 1e-12 {
                    return Err(format!("trial {trial}: tree ({feature}, {threshold}, {g}) vs oracle ({f}, {t}, {gain})"));
                }
            }
            TreeNode::Leaf { .. } => return Err(format!("trial {trial}: root not split")),
        }
    }
    Ok("50 random 20x2 datasets match exhaustive enumeration".into())
}

/// Synthetic rows lie on a segment from their base row to one of its k
/// nearest neighbours, and the draws repeat exactly under a fixed seed.
pub fn smote_properties() -> Check {
    let mut r = rng(9);
    for trial in 0..100 {
        let n = r.random_range(2..15);
        let d = r.random_range(1..6);
        let k = r.random_range(1..7);
        let m = r.random_range(1..40);
        let x = uniform(&mut r, n * d, -5.0, 5.0);
        let xm = Matrix::from_vec(n, d, x.clone());
        let seed = r.random::<u64>();
        let out = smote(&xm, m, k, seed).map_err(|e| e.to_string())?;
        if out != smote(&xm, m, k, seed).map_err(|e| e.to_string())? {
            return Err(format!("trial {trial}: not deterministic"));
        }
        let row = |i: usize| &x[i * d..(i + 1) * d];
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        let keff = k.min(n - 1);
        for s in 0..m {
            let base = s % n;
            let mut others: Vec<usize> = (0..n).filter(|&j| j != base).collect();
            others.sort_by(|&a, &b| dist(row(base), row(a)).partial_cmp(&dist(row(base), row(b))).unwrap().then(a.cmp(&b)));
            let z = out.row(s);
            let on_segment = others[..keff].iter().any(|&j| {
                let (a, b) = (row(base), row(j));
                // least-squares position along a→b, then distance to the segment
                let ab: f64 = a.iter().zip(b).map(|(p, q)| (q - p).powi(2)).sum();
                let t = if ab == 0.0 { 0.0 } else { a.iter().zip(b).zip(z).map(|((p, q), v)| (v - p) * (q - p)).sum::<f64>() / ab };
                (-1e-12..=1.0 + 1e-12).contains(&t)
                    && a.iter().zip(b).zip(z).all(|((p, q), v)| (p + t * (q - p) - v).abs() < 1e-9)
            });
            if !on_segment {
                return Err(format!("trial {trial}: row {s} is not between its base and a {keff}-nearest neighbour"));
            }
        }
    }
    Ok("100 random draws: convex, neighbour-bound, deterministic".into())
}

pub fn mlcore_oracles() -> Check {
    Ok(format!("PCA: {}; CART: {}; SMOTE: {}", pca_eigenvalues()?, cart_root_splits()?, smote_properties()?))
}

// ---------------------------------------------------------------- EDF

fn put(b: &mut Vec<u8>, text: &str, width: usize) {
    let mut f: Vec<u8> = text.bytes().take(width).collect();
    f.resize(width, b' ');
    b.extend_from_slice(&f);
}

pub struct EdfSignal {
    pub label: String,
    pub phys: (f64, f64),
    pub dig: (i32, i32),
    pub spr: usize,
}

/// Assembles an EDF file byte by byte from the published layout.
pub fn craft_edf(version: &str, signals: &[EdfSignal], records: &str, duration: &str, data: &[i16]) -> Vec<u8> {
    let ns = signals.len();
    let mut b = Vec::new();
    put(&mut b, version, 8);
    put(&mut b, "X X X X", 80);
    put(&mut b, "Startdate X X X X", 80);
    put(&mut b, "01.01.01", 8);
    put(&mut b, "00.00.00", 8);
    put(&mut b, &(256 * (ns + 1)).to_string(), 8);
    put(&mut b, "", 44);
    put(&mut b, records, 8);
    put(&mut b, duration, 8);
    put(&mut b, &ns.to_string(), 4);
    let fields: [(usize, &dyn Fn(&EdfSignal) -> String); 10] = [
        (16, &|s| s.label.clone()),
        (80, &|_| "AgAgCl electrode".into()),
        (8, &|_| "uV".into()),
        (8, &|s| s.phys.0.to_string()),
        (8, &|s| s.phys.1.to_string()),
        (8, &|s| s.dig.0.to_string()),
        (8, &|s| s.dig.1.to_string()),
        (80, &|_| "HP:0.1Hz".into()),
        (8, &|s| s.spr.to_string()),
        (32, &|_| String::new()),
    ];
    for (w, f) in fields {
        for s in signals {
            put(&mut b, &f(s), w);
        }
    }
    for d in data {
        b.extend_from_slice(&d.to_le_bytes());
    }
    b
}

/// Physical units per digital step of each signal, read from a header.
fn quanta(bytes: &[u8]) -> Vec<f64> {
    let text = |o: usize, w: usize| std::str::from_utf8(&bytes[o..o + w]).unwrap().trim().parse::<f64>().unwrap();
    let ns = text(252, 4) as usize;
    let at = |before: usize, i: usize| text(256 + before * ns + i * 8, 8);
    (0..ns).map(|i| (at(112, i) - at(104, i)) / (at(128, i) - at(120, i))).collect()
}

pub fn edf_round_trip() -> Check {
    let mut r = rng(2024);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let ns = r.random_range(1..5);
        let spr = [8usize, 16, 32, 64, 100, 256][r.random_range(0..6)];
        let records = r.random_range(1..6);
        let signals: Vec<EdfSignal> = (0..ns)
            .map(|i| {
                let lo = r.random_range(-3000..0) as f64 / 10.0;
                let hi = lo + r.random_range(1..6000) as f64 / 10.0;
                let dlo = r.random_range(-32768..0);
                let dhi = r.random_range(dlo + 1..=32767);
                EdfSignal { label: format!("S{i}-{trial}"), phys: (lo, hi), dig: (dlo, dhi), spr }
            })
            .collect();
        let mut data = Vec::new();
        for _ in 0..records {
            for s in &signals {
                data.extend((0..spr).map(|_| r.random_range(s.dig.0..=s.dig.1) as i16));
            }
        }
        let bytes = craft_edf("0", &signals, &records.to_string(), "1", &data);
        let first = parse_edf(&bytes).map_err(|e| format!("trial {trial}: {e}"))?;
        let written = write_edf(&first).map_err(|e| format!("trial {trial}: {e}"))?;
        let second = parse_edf(&written).map_err(|e| format!("trial {trial}: {e}"))?;
        if first.channel_labels() != second.channel_labels() || first.num_samples() != second.num_samples() {
            return Err(format!("trial {trial}: layout changed"));
        }
        if first.sample_rate_hz() != second.sample_rate_hz() {
            return Err(format!("trial {trial}: rate changed"));
        }
        let q = quanta(&written);
        for c in 0..ns {
            for (a, b) in first.channel(c).iter().zip(second.channel(c)) {
                let steps = (*a as f64 - *b as f64).abs() / q[c];
                worst = worst.max(steps);
                if steps > 1.0 {
                    return Err(format!("trial {trial} channel {c}: {a} vs {b} ({steps:.3} quanta)"));
                }
            }
        }
    }
    Ok(format!("20 files, max deviation {worst:.3} quantum"))
}

fn sig(spr: usize) -> EdfSignal {
    EdfSignal { label: "FP1-F7".into(), phys: (-100.0, 100.0), dig: (-2048, 2047), spr }
}

fn header_at<const O: usize>(e: &EdfError) -> bool {
    matches!(e, EdfError::InvalidHeader { offset, .. } if *offset == O)
}

/// Ten malformed files, each with the error variant it must produce.
pub fn malformed_corpus() -> Vec<(&'static str, Vec<u8>, fn(&EdfError) -> bool)> {
    let good = |spr: usize| craft_edf("0", &[sig(spr)], "1", "1", &vec![0; spr]);
    let mut wrong_header_bytes = good(4);
    wrong_header_bytes[184..192].copy_from_slice(b"999     ");
    let mut zero_signals = good(4);
    zero_signals[252..256].copy_from_slice(b"0   ");
    let bad_phys = EdfSignal { phys: (5.0, 5.0), ..sig(4) };
    let bad_dig = EdfSignal { dig: (10, -10), ..sig(4) };
    let two = [sig(4), EdfSignal { spr: 8, ..sig(4) }];
    let mut truncated = good(16);
    truncated.truncate(truncated.len() - 3);
    vec![
        ("shorter than the fixed header", good(4)[..100].to_vec(), |e| matches!(e, EdfError::InvalidHeader { .. })),
        ("version not 0", craft_edf("1", &[sig(4)], "1", "1", &[0; 4]), header_at::<0>),
        ("header byte count inconsistent", wrong_header_bytes, header_at::<184>),
        ("no signals", zero_signals, |e| matches!(e, EdfError::InvalidHeader { .. })),
        ("record count not a number", craft_edf("0", &[sig(4)], "abc", "1", &[0; 4]), header_at::<236>),
        ("zero record duration", craft_edf("0", &[sig(4)], "1", "0", &[0; 4]), header_at::<244>),
        ("degenerate physical range", craft_edf("0", &[bad_phys], "1", "1", &[0; 4]), |e| matches!(e, EdfError::InvalidHeader { .. })),
        ("inverted digital range", craft_edf("0", &[bad_dig], "1", "1", &[0; 4]), |e| matches!(e, EdfError::InvalidHeader { .. })),
        ("mixed sample rates", craft_edf("0", &two, "1", "1", &[0; 12]), |e| matches!(e, EdfError::UnsupportedLayout(_))),
        ("data shorter than declared", truncated, |e| matches!(e, EdfError::TruncatedData { .. })),
    ]
}

pub fn edf_checks() -> Check {
    let rt = edf_round_trip()?;
    let corpus = malformed_corpus();
    for (name, bytes, expect) in &corpus {
        let outcome = std::panic::catch_unwind(|| parse_edf(bytes));
        match outcome {
            Ok(Err(e)) if expect(&e) => {}
            Ok(Err(e)) => return Err(format!("{name}: unexpected error {e:?}")),
            Ok(Ok(_)) => return Err(format!("{name}: parsed without error")),
            Err(_) => return Err(format!("{name}: parser panicked")),
        }
    }
    // random byte damage must never panic
    let mut r = rng(77);
    let base = craft_edf("0", &[sig(16), EdfSignal { label: "F7-T7".into(), ..sig(16) }], "2", "1", &[5; 64]);
    for _ in 0..500 {
        let mut b = base.clone();
        for _ in 0..r.random_range(1..6) {
            let i = r.random_range(0..b.len());
            b[i] = r.random();
        }
        b.truncate(r.random_range(0..=b.len()));
        if std::panic::catch_unwind(|| parse_edf(&b)).is_err() {
            return Err("parser panicked on damaged bytes".into());
        }
    }
    Ok(format!("{rt}; {} malformed files rejected with the designated error; 500 damaged files, no panic", corpus.len()))
}

// ---------------------------------------------------------------- CLI

pub fn cli(args: &[&str]) -> i32 {
    let mut full = vec!["slimseiz"];
    full.extend_from_slice(args);
    slimseiz::cli::run(full)
}

pub fn cli_ok(args: &[&str]) -> Result<(), String> {
    match cli(args) {
        0 => Ok(()),
        code => Err(format!("`{}` exited with {code}", args.join(" "))),
    }
}

/// A quick synth → ingest → select → train → eval run writing into `dir`.
pub fn small_pipeline(dir: &std::path::Path, jobs: &str, epochs: &str) -> Result<(), String> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let (edf, csv, cache, report, run, eval) = (p("rec.edf"), p("rec.csv"), p("rec.slsz"), p("sel.txt"), p("run"), p("eval.csv"));
    cli_ok(&["synth", "--out-dir", &p(""), "--name", "rec", "--channels", "4", "--duration", "3600", "--rate", "64", "--onsets", "1900", "--seed", "3"])?;
    cli_ok(&["ingest", "--edf", &edf, "--annotations", &csv, "--out", &cache])?;
    cli_ok(&["--jobs", jobs, "select", "--edf", &edf, "--annotations", &csv, "--k", "2", "--m", "4", "--seed", "5", "--out", &report])?;
    cli_ok(&["train", "--cache", &cache, "--selection", &report, "--out-dir", &run, "--epochs", epochs, "--seed", "5"])?;
    cli_ok(&[
        "--jobs", jobs, "eval", "--checkpoint", &format!("{run}/model.slszw"), "--cache", &cache, "--kfold", "3", "--epochs", "1",
        "--seed", "5", "--out", &eval,
    ])
}

pub const PIPELINE_OUTPUTS: [&str; 9] = [
    "rec.edf",
    "rec.csv",
    "rec.slsz",
    "sel.txt",
    "run/model.slszw",
    "run/loss.csv",
    "run/metrics.csv",
    "run/manifest.txt",
    "eval.csv",
];

/// Two identical invocations with `--jobs 1` give byte-identical files.
pub fn determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    small_pipeline(a.path(), "1", "2")?;
    small_pipeline(b.path(), "1", "2")?;
    let mut n = 0;
    for f in PIPELINE_OUTPUTS.iter().filter(|f| !f.is_empty()) {
        let (x, y) = (std::fs::read(a.path().join(f)), std::fs::read(b.path().join(f)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => n += 1,
            (Ok(_), Ok(_)) => return Err(format!("{f} differs between runs")),
            _ => return Err(format!("{f} missing")),
        }
    }
    Ok(format!("{n} artifacts byte-identical across two runs (report, checkpoint, CSVs, cache, manifest)"))
}
