#![allow(dead_code)]

use std::cell::Cell;

use ifsynth::tensor::{nn, Graph, Tensor, Var};
use ifsynth::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut Rng8, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| r.random_range(lo..hi))
}

/// Values with magnitude in [0.05, 1) and random sign, clear of the leaky-ReLU kink.
pub fn off_zero(r: &mut Rng8, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = r.random_range(0.05..1.0);
        if r.random_bool(0.5) { m } else { -m }
    })
}

type Forward = for<'g> fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Result<Var<'g, f64>>;
type Inputs = fn(&mut Rng8) -> Vec<Tensor<f64>>;

pub struct OpCase {
    pub name: &'static str,
    pub inputs: Inputs,
    pub forward: Forward,
}

fn dims(r: &mut Rng8) -> (usize, usize, usize, usize) {
    (r.random_range(1..3), 2 * r.random_range(1..3), 2 * r.random_range(1..3), r.random_range(1..4))
}

fn labels(n: usize, c: usize) -> Vec<usize> {
    (0..n).map(|i| (i * 7 + 3) % c).collect()
}

/// Distances from the non-smooth or badly conditioned regions of the ops under test.
///
/// Central differences are only an accurate oracle where the function is smooth on
/// the scale of the step, so instances that land near a leaky-ReLU kink, a near-zero
/// pixel-norm vector or a near-identical stddev position are redrawn.
pub struct Probe {
    kink: Cell<f64>,
    rms: Cell<f64>,
    spread: Cell<f64>,
}

impl Probe {
    fn new() -> Self {
        Probe { kink: Cell::new(f64::INFINITY), rms: Cell::new(f64::INFINITY), spread: Cell::new(f64::INFINITY) }
    }

    fn clear(&self) -> bool {
        self.kink.get() > 3e-3 && self.rms.get() > 0.1 && self.spread.get() > 0.05
    }
}

fn lower(c: &Cell<f64>, v: f64) {
    c.set(c.get().min(v));
}

/// Smallest channel RMS over all positions of an NHWC tensor.
pub fn min_rms(t: &Tensor<f64>) -> f64 {
    let c = *t.shape().last().unwrap();
    t.data().chunks(c).map(|v| (v.iter().map(|x| x * x).sum::<f64>() / c as f64).sqrt()).fold(f64::INFINITY, f64::min)
}

/// Smallest cross-batch population stddev over all positions.
pub fn min_spread(t: &Tensor<f64>) -> f64 {
    let n = t.shape()[0];
    let inner = t.len() / n;
    (0..inner)
        .map(|p| {
            let vals: Vec<f64> = (0..n).map(|b| t.data()[b * inner + p]).collect();
            let m = vals.iter().sum::<f64>() / n as f64;
            (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

fn probed_lrelu<'g>(x: Var<'g, f64>, probe: Option<&Probe>) -> Var<'g, f64> {
    if let Some(p) = probe {
        lower(&p.kink, x.value().data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs())));
    }
    nn::leaky_relu(x)
}

fn probed_pixel_norm<'g>(x: Var<'g, f64>, probe: Option<&Probe>) -> Result<Var<'g, f64>> {
    if let Some(p) = probe {
        lower(&p.rms, min_rms(&x.value()));
    }
    nn::pixel_norm(x)
}

fn probed_stddev<'g>(x: Var<'g, f64>, probe: Option<&Probe>) -> Result<Var<'g, f64>> {
    if let Some(p) = probe {
        lower(&p.spread, min_spread(&x.value()));
    }
    nn::minibatch_stddev(x)
}

/// conv → LReLU → pixel norm → downsample → minibatch stddev → dense → cross-entropy.
fn composite<'g>(g: &'g Graph<f64>, v: &[Var<'g, f64>], probe: Option<&Probe>) -> Result<Var<'g, f64>> {
    let (x, w1, b1, w2, b2) = (v[0], v[1], v[2], v[3], v[4]);
    let h = probed_lrelu(nn::conv(x, w1, b1)?, probe);
    let h = probed_pixel_norm(h, probe)?.downsample2x()?;
    let h = probed_stddev(h, probe)?;
    let n = h.shape()[0];
    let flat = h.reshape(&[n, h.value().len() / n])?;
    let _ = g;
    nn::dense(flat, w2, b2)?.softmax_xent(&labels(n, 3))
}

/// Gradient-penalty style objective: squared deviation of the input-gradient norm from 1.
fn penalty<'g>(g: &'g Graph<f64>, v: &[Var<'g, f64>], probe: Option<&Probe>) -> Result<Var<'g, f64>> {
    let (x, w1, w2, b2) = (v[0], v[1], v[2], v[3]);
    let h = probed_lrelu(x.conv2d(w1)?, probe);
    let h = probed_stddev(h.tanh().downsample2x()?, probe)?;
    let n = h.shape()[0];
    let critic = h.reshape(&[n, h.value().len() / n])?.matmul(w2)?.add_bias(b2)?;
    let gx = g.grad(critic.sum_all(), &[x])?[0].expect("critic depends on its input");
    let norm = gx.mul(gx)?.reshape(&[n, gx.value().len() / n])?.sum_axis(1)?.add_scalar(1e-12).powf(0.5);
    Ok(norm.add_scalar(-1.0).powf(2.0).mean_all())
}

pub fn composite_inputs(r: &mut Rng8) -> Vec<Tensor<f64>> {
    loop {
        let (n, h, w, c) = (2, 2, 4, 2);
        let co = 3;
        let xs = vec![
            uniform(r, &[n, h, w, c], -1.0, 1.0),
            uniform(r, &[3, 3, c, co], -1.0, 1.0),
            uniform(r, &[co], -0.1, 0.1),
            uniform(r, &[(h / 2) * (w / 2) * (co + 1), 3], -0.5, 0.5),
            uniform(r, &[3], -0.1, 0.1),
        ];
        if well_conditioned(&xs, composite) {
            return xs;
        }
    }
}

pub fn penalty_inputs(r: &mut Rng8) -> Vec<Tensor<f64>> {
    loop {
        let (n, h, w, c) = (2, 4, 2, 2);
        let co = 2;
        let xs = vec![
            uniform(r, &[n, h, w, c], -1.0, 1.0),
            uniform(r, &[3, 3, c, co], -1.0, 1.0),
            uniform(r, &[(h / 2) * (w / 2) * (co + 1), 1], -1.0, 1.0),
            uniform(r, &[1], -0.1, 0.1),
        ];
        if well_conditioned(&xs, penalty) {
            return xs;
        }
    }
}

fn well_conditioned(
    xs: &[Tensor<f64>],
    f: for<'g> fn(&'g Graph<f64>, &[Var<'g, f64>], Option<&Probe>) -> Result<Var<'g, f64>>,
) -> bool {
    let probe = Probe::new();
    let g = Graph::new();
    let vars: Vec<_> = xs.iter().map(|x| g.leaf(x.clone())).collect();
    f(&g, &vars, Some(&probe)).unwrap();
    probe.clear()
}

pub fn catalog() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "add",
            inputs: |r| vec![uniform(r, &[2, 3], -1.0, 1.0), uniform(r, &[2, 3], -1.0, 1.0)],
            forward: |_, v| v[0].add(v[1]),
        },
        OpCase {
            name: "sub",
            inputs: |r| vec![uniform(r, &[3, 2], -1.0, 1.0), uniform(r, &[3, 2], -1.0, 1.0)],
            forward: |_, v| v[0].sub(v[1]),
        },
        OpCase {
            name: "mul",
            inputs: |r| vec![uniform(r, &[4], -1.0, 1.0), uniform(r, &[4], -1.0, 1.0)],
            forward: |_, v| v[0].mul(v[1]),
        },
        OpCase {
            name: "scale",
            inputs: |r| vec![uniform(r, &[5], -1.0, 1.0)],
            forward: |_, v| Ok(v[0].scale(-1.7)),
        },
        OpCase {
            name: "add_scalar",
            inputs: |r| vec![uniform(r, &[5], -1.0, 1.0)],
            forward: |_, v| Ok(v[0].add_scalar(0.3)),
        },
        OpCase {
            name: "powf",
            inputs: |r| vec![uniform(r, &[5], 0.5, 2.0)],
            forward: |_, v| Ok(v[0].powf(-0.5)),
        },
        OpCase {
            name: "tanh",
            inputs: |r| vec![uniform(r, &[2, 4], -2.0, 2.0)],
            forward: |_, v| Ok(v[0].tanh()),
        },
        OpCase {
            name: "leaky_relu",
            inputs: |r| vec![off_zero(r, &[3, 4])],
            forward: |_, v| Ok(nn::leaky_relu(v[0])),
        },
        OpCase {
            name: "matmul",
            inputs: |r| vec![uniform(r, &[2, 3], -1.0, 1.0), uniform(r, &[3, 4], -1.0, 1.0)],
            forward: |_, v| v[0].matmul(v[1]),
        },
        OpCase {
            name: "matmul_transposed",
            inputs: |r| vec![uniform(r, &[3, 2], -1.0, 1.0), uniform(r, &[4, 3], -1.0, 1.0)],
            forward: |_, v| v[0].matmul_t(v[1], true, true),
        },
        OpCase {
            name: "conv2d_3x3",
            inputs: |r| {
                let (n, h, w, c) = dims(r);
                vec![uniform(r, &[n, h, w, c], -1.0, 1.0), uniform(r, &[3, 3, c, 2], -1.0, 1.0)]
            },
            forward: |_, v| v[0].conv2d(v[1]),
        },
        OpCase {
            name: "conv2d_1x1",
            inputs: |r| {
                let (n, h, w, c) = dims(r);
                vec![uniform(r, &[n, h, w, c], -1.0, 1.0), uniform(r, &[1, 1, c, 3], -1.0, 1.0)]
            },
            forward: |_, v| v[0].conv2d(v[1]),
        },
        OpCase {
            name: "upsample2x",
            inputs: |r| {
                let (n, h, w, c) = dims(r);
                vec![uniform(r, &[n, h, w, c], -1.0, 1.0)]
            },
            forward: |_, v| v[0].upsample2x(),
        },
        OpCase {
            name: "downsample2x",
            inputs: |r| {
                let (n, h, w, c) = dims(r);
                vec![uniform(r, &[n, h, w, c], -1.0, 1.0)]
            },
            forward: |_, v| v[0].downsample2x(),
        },
        OpCase {
            name: "reshape",
            inputs: |r| vec![uniform(r, &[2, 6], -1.0, 1.0)],
            forward: |_, v| v[0].reshape(&[3, 4]),
        },
        OpCase {
            name: "sum_axis",
            inputs: |r| vec![uniform(r, &[2, 3, 4], -1.0, 1.0)],
            forward: |_, v| v[0].sum_axis(1),
        },
        OpCase {
            name: "broadcast_axis",
            inputs: |r| vec![uniform(r, &[2, 3], -1.0, 1.0)],
            forward: |_, v| v[0].broadcast_axis(1, 4),
        },
        OpCase {
            name: "concat_channels",
            inputs: |r| vec![uniform(r, &[2, 2, 3], -1.0, 1.0), uniform(r, &[2, 2, 1], -1.0, 1.0)],
            forward: |_, v| v[0].concat_last(v[1]),
        },
        OpCase {
            name: "slice_channels",
            inputs: |r| vec![uniform(r, &[2, 5], -1.0, 1.0)],
            forward: |_, v| v[0].slice_last(1, 3),
        },
        OpCase {
            name: "pad_channels",
            inputs: |r| vec![uniform(r, &[2, 2], -1.0, 1.0)],
            forward: |_, v| v[0].pad_last(1, 5),
        },
        OpCase {
            name: "add_bias",
            inputs: |r| vec![uniform(r, &[2, 2, 3], -1.0, 1.0), uniform(r, &[3], -1.0, 1.0)],
            forward: |_, v| v[0].add_bias(v[1]),
        },
        OpCase {
            name: "reduce_sum",
            inputs: |r| vec![uniform(r, &[3, 3], -1.0, 1.0)],
            forward: |_, v| Ok(v[0].sum_all()),
        },
        OpCase {
            name: "reduce_mean",
            inputs: |r| vec![uniform(r, &[3, 3], -1.0, 1.0)],
            forward: |_, v| Ok(v[0].mean_all()),
        },
        OpCase {
            name: "broadcast_scalar",
            inputs: |r| vec![uniform(r, &[], -1.0, 1.0)],
            forward: |_, v| v[0].broadcast_scalar(&[2, 3]),
        },
        OpCase {
            name: "softmax",
            inputs: |r| vec![uniform(r, &[3, 4], -2.0, 2.0)],
            forward: |_, v| v[0].softmax(),
        },
        OpCase {
            name: "softmax_cross_entropy",
            inputs: |r| vec![uniform(r, &[4, 5], -2.0, 2.0)],
            forward: |_, v| v[0].softmax_xent(&labels(4, 5)),
        },
        OpCase {
            name: "pixel_norm",
            inputs: |r| loop {
                let (n, h, w, c) = dims(r);
                let x = uniform(r, &[n, h, w, c + 1], -1.0, 1.0);
                if min_rms(&x) > 0.2 {
                    return vec![x];
                }
            },
            forward: |_, v| nn::pixel_norm(v[0]),
        },
        OpCase {
            name: "minibatch_stddev",
            inputs: |r| loop {
                let (_, h, w, c) = dims(r);
                let x = uniform(r, &[3, h, w, c], -1.0, 1.0);
                if min_spread(&x) > 0.1 {
                    return vec![x];
                }
            },
            forward: |_, v| nn::minibatch_stddev(v[0]),
        },
        OpCase { name: "composite_net", inputs: composite_inputs, forward: |g, v| composite(g, v, None) },
        OpCase { name: "gradient_penalty", inputs: penalty_inputs, forward: |g, v| penalty(g, v, None) },
    ]
}
