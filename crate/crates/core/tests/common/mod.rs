#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use satfuse::model::{FusionNet, ModelConfig};
use satfuse::nn::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout,
    dropout_backward, gradcheck, maxpool2, maxpool2_backward, relu, relu_backward, softmax_ce,
    BatchNormState, Mode, Padding, Tensor,
};

pub const SHAPES_PER_LAYER: usize = 20;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn tensor(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::from_f64(shape, data).unwrap()
}

fn dot(a: &Tensor<f64>, b: &[f64]) -> f64 {
    a.data().iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Worst relative error over one gradient, comparing against central
/// differences of `f` around `x`.
fn check(f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &Tensor<f64>) -> f64 {
    gradcheck::grad_check(f, x, analytic.data()).max_rel_error
}

/// Per-layer worst error, keyed by the shape description that produced it.
#[derive(Debug, Clone)]
pub struct LayerReport {
    pub layer: &'static str,
    pub shapes: usize,
    pub max_rel_error: f64,
    pub worst_shape: String,
}

impl LayerReport {
    fn new(layer: &'static str) -> Self {
        Self {
            layer,
            shapes: 0,
            max_rel_error: 0.0,
            worst_shape: String::new(),
        }
    }

    fn record(&mut self, err: f64, shape: String) {
        self.shapes += 1;
        if err > self.max_rel_error || err.is_nan() {
            self.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
            self.worst_shape = shape;
        }
    }
}

pub fn conv_report(seed: u64) -> LayerReport {
    let mut rep = LayerReport::new("conv");
    let mut r = rng(seed);
    for case in 0..SHAPES_PER_LAYER {
        let padding = if case % 2 == 0 { Padding::Valid } else { Padding::Same };
        let n = r.gen_range(1..=3);
        let h = r.gen_range(3..=6);
        let w = r.gen_range(3..=6);
        let cin = r.gen_range(1..=3);
        let cout = r.gen_range(1..=3);
        let k = if padding == Padding::Same { [1, 3][r.gen_range(0..2)] } else { r.gen_range(1..=3) };
        let xs = [n, h, w, cin];
        let ks = [k, k, cin, cout];
        let x = uniform(&mut r, xs.iter().product(), -1.0, 1.0);
        let kern = uniform(&mut r, ks.iter().product(), -1.0, 1.0);
        let bias = uniform(&mut r, cout, -1.0, 1.0);
        let out_len = n * padding.output_size(h, k) * padding.output_size(w, k) * cout;
        let up = uniform(&mut r, out_len, -1.0, 1.0);
        let kt = tensor(&ks, &kern);
        let bt = tensor(&[cout], &bias);
        let xt = tensor(&xs, &x);
        let out = conv2d_forward(&xt, &kt, &bt, padding).unwrap();
        let upt = tensor(out.shape(), &up);
        let g = conv2d_backward(&upt, &xt, &kt, padding).unwrap();

        let ex = check(
            |v| dot(&conv2d_forward(&tensor(&xs, v), &kt, &bt, padding).unwrap(), &up),
            &x,
            &g.input,
        );
        let ek = check(
            |v| dot(&conv2d_forward(&xt, &tensor(&ks, v), &bt, padding).unwrap(), &up),
            &kern,
            &g.kernels,
        );
        let eb = check(
            |v| dot(&conv2d_forward(&xt, &kt, &tensor(&[cout], v), padding).unwrap(), &up),
            &bias,
            &g.bias,
        );
        rep.record(ex.max(ek).max(eb), format!("{xs:?} * {ks:?} {}", padding.as_str()));
    }
    rep
}

pub fn dense_report(seed: u64) -> LayerReport {
    let mut rep = LayerReport::new("dense");
    let mut r = rng(seed);
    for _ in 0..SHAPES_PER_LAYER {
        let (n, din, dout) = (r.gen_range(1..=4), r.gen_range(1..=6), r.gen_range(1..=5));
        let x = uniform(&mut r, n * din, -1.0, 1.0);
        let w = uniform(&mut r, din * dout, -1.0, 1.0);
        let b = uniform(&mut r, dout, -1.0, 1.0);
        let up = uniform(&mut r, n * dout, -1.0, 1.0);
        let (xt, wt, bt) = (tensor(&[n, din], &x), tensor(&[din, dout], &w), tensor(&[dout], &b));
        let upt = tensor(&[n, dout], &up);
        let g = dense_backward(&upt, &xt, &wt).unwrap();
        let ex = check(|v| dot(&dense_forward(&tensor(&[n, din], v), &wt, &bt).unwrap(), &up), &x, &g.input);
        let ew = check(|v| dot(&dense_forward(&xt, &tensor(&[din, dout], v), &bt).unwrap(), &up), &w, &g.weight);
        let eb = check(|v| dot(&dense_forward(&xt, &wt, &tensor(&[dout], v)).unwrap(), &up), &b, &g.bias);
        rep.record(ex.max(ew).max(eb), format!("{n}x{din} -> {dout}"));
    }
    rep
}

pub fn batchnorm_report(seed: u64) -> LayerReport {
    let mut rep = LayerReport::new("batchnorm");
    let mut r = rng(seed);
    for _ in 0..SHAPES_PER_LAYER {
        let (n, d) = (r.gen_range(2..=6), r.gen_range(1..=5));
        let x = uniform(&mut r, n * d, -2.0, 2.0);
        let gamma = uniform(&mut r, d, 0.5, 1.5);
        let beta = uniform(&mut r, d, -0.5, 0.5);
        let up = uniform(&mut r, n * d, -1.0, 1.0);
        let make = |gm: &[f64], bt: &[f64]| {
            let mut s = BatchNormState::<f64>::new(d, 0.99, 1e-5);
            s.gamma = tensor(&[d], gm);
            s.beta = tensor(&[d], bt);
            s
        };
        let bn = make(&gamma, &beta);
        let xt = tensor(&[n, d], &x);
        let (_, cache, _) = bn.normalize_batch(&xt).unwrap();
        let g = bn.backward(&tensor(&[n, d], &up), &cache).unwrap();
        let out = |s: &BatchNormState<f64>, x: &Tensor<f64>| dot(&s.normalize_batch(x).unwrap().0, &up);
        let ex = check(|v| out(&bn, &tensor(&[n, d], v)), &x, &g.input);
        let eg = check(|v| out(&make(v, &beta), &xt), &gamma, &g.gamma);
        let eb = check(|v| out(&make(&gamma, v), &xt), &beta, &g.beta);
        rep.record(ex.max(eg).max(eb), format!("{n}x{d}"));
    }
    rep
}

/// Values at least `gap` away from zero, so no probe crosses the kink.
fn away_from_zero(r: &mut ChaCha8Rng, n: usize, gap: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = r.gen_range(gap..2.0);
            if r.gen::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect()
}

pub fn relu_report(seed: u64) -> LayerReport {
    let mut rep = LayerReport::new("relu");
    let mut r = rng(seed);
    for _ in 0..SHAPES_PER_LAYER {
        let shape = [r.gen_range(1..=4), r.gen_range(1..=7)];
        let len = shape[0] * shape[1];
        let x = away_from_zero(&mut r, len, 1e-3);
        let up = uniform(&mut r, len, -1.0, 1.0);
        let xt = tensor(&shape, &x);
        let g = relu_backward(&tensor(&shape, &up), &xt).unwrap();
        let e = check(|v| dot(&relu(&tensor(&shape, v)), &up), &x, &g);
        rep.record(e, format!("{shape:?}"));
    }
    rep
}

pub fn maxpool_report(seed: u64) -> LayerReport {
    let mut rep = LayerReport::new("maxpool");
    let mut r = rng(seed);
    for _ in 0..SHAPES_PER_LAYER {
        let shape = [r.gen_range(1..=2), 2 * r.gen_range(1..=3), 2 * r.gen_range(1..=3), r.gen_range(1..=3)];
        let len: usize = shape.iter().product();
        // distinct values spaced well beyond the probe step
        let mut x: Vec<f64> = (0..len).map(|i| i as f64 * 0.01).collect();
        for i in (1..len).rev() {
            x.swap(i, r.gen_range(0..=i));
        }
        let xt = tensor(&shape, &x);
        let pooled = maxpool2(&xt).unwrap();
        let up = uniform(&mut r, pooled.output.len(), -1.0, 1.0);
        let upt = tensor(pooled.output.shape(), &up);
        let g = maxpool2_backward(&upt, &pooled.argmax, &shape).unwrap();
        let e = check(|v| dot(&maxpool2(&tensor(&shape, v)).unwrap().output, &up), &x, &g);
        rep.record(e, format!("{shape:?}"));
    }
    rep
}

pub fn dropout_report(seed: u64) -> LayerReport {
    let mut rep = LayerReport::new("dropout");
    let mut r = rng(seed);
    for case in 0..SHAPES_PER_LAYER {
        let shape = [r.gen_range(1..=4), r.gen_range(1..=8)];
        let len = shape[0] * shape[1];
        let rate = [0.0, 0.2, 0.25, 0.5][case % 4];
        let x = uniform(&mut r, len, -1.0, 1.0);
        let up = uniform(&mut r, len, -1.0, 1.0);
        let mask_seed = r.gen();
        let (_, mask) = dropout(&tensor(&shape, &x), rate, Mode::Train, mask_seed).unwrap();
        let g = dropout_backward(&tensor(&shape, &up), mask.as_deref());
        let e = check(
            |v| dot(&dropout(&tensor(&shape, v), rate, Mode::Train, mask_seed).unwrap().0, &up),
            &x,
            &g,
        );
        rep.record(e, format!("{shape:?} rate {rate}"));
    }
    rep
}

pub fn softmax_ce_report(seed: u64) -> LayerReport {
    let mut rep = LayerReport::new("softmax_ce");
    let mut r = rng(seed);
    for _ in 0..SHAPES_PER_LAYER {
        let (n, k) = (r.gen_range(1..=4), r.gen_range(2..=6));
        let z = uniform(&mut r, n * k, -3.0, 3.0);
        let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
        let out = softmax_ce(&tensor(&[n, k], &z), &labels).unwrap();
        let e = check(|v| softmax_ce(&tensor(&[n, k], v), &labels).unwrap().loss, &z, &out.grad);
        rep.record(e, format!("{n}x{k}"));
    }
    rep
}

pub fn all_layer_reports(seed: u64) -> Vec<LayerReport> {
    vec![
        conv_report(seed),
        dense_report(seed + 1),
        batchnorm_report(seed + 2),
        relu_report(seed + 3),
        maxpool_report(seed + 4),
        dropout_report(seed + 5),
        softmax_ce_report(seed + 6),
    ]
}

/// Tolerance a layer must meet.
pub fn layer_tolerance(layer: &str) -> f64 {
    match layer {
        "dense" | "softmax_ce" => 1e-6,
        _ => 1e-4,
    }
}

/// Small fused network: two valid 3x3 convs on 6x6x4, pool to 1x1x3,
/// 2 fused features, dense 4 (batch-normed) and 5, three classes.
pub fn tiny_fused_config() -> ModelConfig {
    ModelConfig {
        input_height: 6,
        input_width: 6,
        conv_maps: vec![2, 3],
        fused_feature_width: 2,
        dense_widths: vec![4, 5],
        num_classes: 3,
        ..ModelConfig::default()
    }
}

/// End-to-end check of every parameter gradient of a fused model on a
/// 2-sample batch; returns the worst relative error.
pub fn full_model_error(seed: u64) -> f64 {
    let cfg = tiny_fused_config();
    let mut net = FusionNet::<f64>::build(&cfg).unwrap();
    let mut r = rng(seed);
    for p in net.params_mut() {
        for v in p.data_mut() {
            *v = r.gen_range(-0.8..0.8);
        }
    }
    let x = tensor(&[2, 6, 6, 4], &uniform(&mut r, 2 * 6 * 6 * 4, 0.0, 1.0));
    let f = tensor(&[2, 2], &uniform(&mut r, 4, -1.0, 1.0));
    let labels = [0usize, 2];
    let step = 5;

    let (logits, trace) = net.forward_train(&x, Some(&f), step).unwrap();
    let ce = softmax_ce(&logits, &labels).unwrap();
    let grads = net.backward(&trace, &ce.grad).unwrap();

    let mut worst: f64 = 0.0;
    let count = grads.len();
    for pi in 0..count {
        let base: Vec<f64> = net.params()[pi].1.data().to_vec();
        let loss_at = |v: &[f64]| {
            let mut probe = net.clone();
            probe.params_mut()[pi].data_mut().copy_from_slice(v);
            let (lg, _) = probe.forward_train(&x, Some(&f), step).unwrap();
            softmax_ce(&lg, &labels).unwrap().loss
        };
        let e = check(loss_at, &base, &grads[pi]);
        worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
    }
    worst
}

/// Co-occurrence counts by enumerating every ordered pixel pair and testing
/// whether their displacement is one of the offsets.
pub fn cooccurrence_oracle(
    grid: &[usize],
    h: usize,
    w: usize,
    levels: usize,
    offsets: &[(isize, isize)],
    symmetric: bool,
) -> Vec<f64> {
    let mut counts = vec![0u64; levels * levels];
    for a in 0..h * w {
        for b in 0..h * w {
            let (ya, xa) = ((a / w) as isize, (a % w) as isize);
            let (yb, xb) = ((b / w) as isize, (b % w) as isize);
            for &(dy, dx) in offsets {
                if yb - ya == dy && xb - xa == dx {
                    counts[grid[a] * levels + grid[b]] += 1;
                    if symmetric {
                        counts[grid[b] * levels + grid[a]] += 1;
                    }
                }
            }
        }
    }
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Box-Muller normal draws.
pub fn normals(r: &mut ChaCha8Rng, n: usize, mean: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u1: f64 = 1.0 - r.gen::<f64>();
            let u2: f64 = r.gen();
            mean + (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect()
}
