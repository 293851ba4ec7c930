//! Generator and discriminator forward passes over graph-bound parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use std::borrow::Cow;

use super::config::GanConfig;
use crate::error::{Error, Result};
use crate::tensor::array as k;
use crate::tensor::{nn, Bound, ParamSet, Scalar, Tensor, Var};

/// Layer name and output shape (batch axis excluded), in evaluation order.
pub type ShapeTrace = Vec<(String, Vec<usize>)>;

fn record<T: Scalar>(trace: &mut Option<&mut ShapeTrace>, name: &str, v: Var<'_, T>) {
    if let Some(t) = trace.as_deref_mut() {
        t.push((name.to_string(), v.shape()[1..].to_vec()));
    }
}

/// Channels entering discriminator block `s` (from the block above, or from its input layer).
pub fn disc_in_channels(cfg: &GanConfig, s: usize) -> usize {
    cfg.channels[(s + 1).min(cfg.stage_count() - 1)]
}

fn fan_in(shape: &[usize]) -> usize {
    shape[..shape.len() - 1].iter().product()
}

fn he_std(shape: &[usize], gain: f64) -> f64 {
    gain / (fan_in(shape) as f64).sqrt()
}

const RELU_GAIN: f64 = std::f64::consts::SQRT_2;

fn weight_gain(name: &str) -> f64 {
    if name.contains("to_rgb") || name.contains("critic") || name.contains("classifier") {
        1.0
    } else {
        RELU_GAIN
    }
}

fn add_layer(
    set: &mut ParamSet<f32>,
    rng: &mut ChaCha8Rng,
    name: &str,
    shape: &[usize],
    equalized: bool,
) -> Result<()> {
    let std = if equalized { 1.0 } else { he_std(shape, weight_gain(name)) };
    let w = Tensor::from_fn(shape, |_| {
        let z: f64 = StandardNormal.sample(rng);
        (z * std) as f32
    });
    set.insert(format!("{name}/w"), w)?;
    set.insert(format!("{name}/b"), Tensor::zeros(&[*shape.last().unwrap()]))
}

/// Freshly initialized generator parameters.
pub fn init_generator(cfg: &GanConfig, seed: u64) -> Result<ParamSet<f32>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParamSet::new();
    let (h0, w0) = cfg.base_shape;
    let c = &cfg.channels;
    let eq = cfg.equalized_lr;
    add_layer(&mut p, &mut rng, "g/s0/dense", &[cfg.input_dim(), h0 * w0 * c[0]], eq)?;
    add_layer(&mut p, &mut rng, "g/s0/conv", &[3, 3, c[0], c[0]], eq)?;
    for s in 1..cfg.stage_count() {
        add_layer(&mut p, &mut rng, &format!("g/s{s}/conv0"), &[3, 3, c[s - 1], c[s]], eq)?;
        add_layer(&mut p, &mut rng, &format!("g/s{s}/conv1"), &[3, 3, c[s], c[s]], eq)?;
    }
    for (s, &cs) in c.iter().enumerate() {
        add_layer(&mut p, &mut rng, &format!("g/s{s}/to_rgb"), &[1, 1, cs, 2], eq)?;
    }
    Ok(p)
}

/// Freshly initialized discriminator parameters (trunk, critic head, pitch head).
pub fn init_discriminator(cfg: &GanConfig, seed: u64) -> Result<ParamSet<f32>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParamSet::new();
    let (h0, w0) = cfg.base_shape;
    let c = &cfg.channels;
    let eq = cfg.equalized_lr;
    for s in 0..cfg.stage_count() {
        add_layer(&mut p, &mut rng, &format!("d/s{s}/from_rgb"), &[1, 1, 2, disc_in_channels(cfg, s)], eq)?;
    }
    for s in (1..cfg.stage_count()).rev() {
        add_layer(&mut p, &mut rng, &format!("d/s{s}/conv0"), &[3, 3, disc_in_channels(cfg, s), c[s]], eq)?;
        add_layer(&mut p, &mut rng, &format!("d/s{s}/conv1"), &[3, 3, c[s], c[s]], eq)?;
    }
    add_layer(&mut p, &mut rng, "d/s0/conv0", &[3, 3, disc_in_channels(cfg, 0) + 1, c[0]], eq)?;
    add_layer(&mut p, &mut rng, "d/s0/conv1", &[3, 3, c[0], c[0]], eq)?;
    add_layer(&mut p, &mut rng, "d/critic", &[h0 * w0 * c[0], 1], eq)?;
    add_layer(&mut p, &mut rng, "d/classifier", &[h0 * w0 * c[0], cfg.pitch_dim], eq)?;
    Ok(p)
}

/// Parameters of one layer as graph values, with run-time He scaling when enabled.
struct Layer<'g, T> {
    w: Var<'g, T>,
    b: Var<'g, T>,
}

fn layer<'g, T: Scalar>(cfg: &GanConfig, p: &Bound<'g, '_, T>, name: &str) -> Result<Layer<'g, T>> {
    let w = p.get(&format!("{name}/w"))?;
    let b = p.get(&format!("{name}/b"))?;
    let w = if cfg.equalized_lr { w.scale(T::lit(he_std(&w.shape(), weight_gain(name)))) } else { w };
    Ok(Layer { w, b })
}

fn conv<'g, T: Scalar>(cfg: &GanConfig, p: &Bound<'g, '_, T>, name: &str, x: Var<'g, T>) -> Result<Var<'g, T>> {
    let l = layer(cfg, p, name)?;
    nn::conv(x, l.w, l.b)
}

fn gen_conv<'g, T: Scalar>(
    cfg: &GanConfig,
    p: &Bound<'g, '_, T>,
    name: &str,
    x: Var<'g, T>,
    trace: &mut Option<&mut ShapeTrace>,
) -> Result<Var<'g, T>> {
    let y = nn::pixel_norm(nn::leaky_relu(conv(cfg, p, name, x)?))?;
    record(trace, name, y);
    Ok(y)
}

fn to_rgb<'g, T: Scalar>(cfg: &GanConfig, p: &Bound<'g, '_, T>, s: usize, x: Var<'g, T>) -> Result<Var<'g, T>> {
    Ok(conv(cfg, p, &format!("g/s{s}/to_rgb"), x)?.tanh())
}

fn check_stage(cfg: &GanConfig, stage: usize, alpha: f64) -> Result<()> {
    if stage >= cfg.stage_count() {
        return Err(Error::Config(format!("stage {stage} but network has {} stages", cfg.stage_count())));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("blend α = {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// Generator output `[n, H_s, W_s, 2]` at `stage`, with the newest stage faded in by `alpha`.
///
/// `z` is `[n, latent]` and `pitch` the `[n, pitch_dim]` one-hot conditioning.
#[allow(clippy::too_many_arguments)]
pub fn generator<'g, T: Scalar>(
    cfg: &GanConfig,
    p: &Bound<'g, '_, T>,
    z: Var<'g, T>,
    pitch: Var<'g, T>,
    stage: usize,
    alpha: f64,
    mut trace: Option<&mut ShapeTrace>,
) -> Result<Var<'g, T>> {
    check_stage(cfg, stage, alpha)?;
    let n = z.shape()[0];
    let (h0, w0) = cfg.base_shape;
    let c0 = cfg.channels[0];
    let x = z.concat_last(pitch)?;
    if x.shape()[1] != cfg.input_dim() {
        return Err(Error::shape("generator", format!("input {:?}, expected width {}", x.shape(), cfg.input_dim())));
    }
    if let Some(t) = trace.as_deref_mut() {
        t.push(("concat(z, pitch)".into(), vec![1, 1, cfg.input_dim()]));
    }
    let l = layer(cfg, p, "g/s0/dense")?;
    let h = nn::dense(x, l.w, l.b)?.reshape(&[n, h0, w0, c0])?;
    let h = nn::pixel_norm(nn::leaky_relu(h))?;
    record(&mut trace, "g/s0/dense", h);
    let mut h = gen_conv(cfg, p, "g/s0/conv", h, &mut trace)?;
    let mut prev = h;
    for s in 1..=stage {
        prev = h;
        let up = h.upsample2x()?;
        record(&mut trace, &format!("g/s{s}/upsample"), up);
        let a = gen_conv(cfg, p, &format!("g/s{s}/conv0"), up, &mut trace)?;
        h = gen_conv(cfg, p, &format!("g/s{s}/conv1"), a, &mut trace)?;
    }
    let out = to_rgb(cfg, p, stage, h)?;
    record(&mut trace, "generator output", out);
    if stage == 0 || alpha >= 1.0 {
        return Ok(out);
    }
    let old = to_rgb(cfg, p, stage - 1, prev)?.upsample2x()?;
    out.scale(T::lit(alpha)).add(old.scale(T::lit(1.0 - alpha)))
}

fn plain_weight<'a>(cfg: &GanConfig, p: &'a ParamSet<f32>, name: &str) -> Result<(Cow<'a, Tensor<f32>>, &'a Tensor<f32>)> {
    let get = |suffix: &str| {
        let key = format!("{name}/{suffix}");
        p.get(&key).ok_or_else(|| Error::Invalid(format!("missing parameter {key}")))
    };
    let (w, b) = (get("w")?, get("b")?);
    if !cfg.equalized_lr {
        return Ok((Cow::Borrowed(w), b));
    }
    let c = he_std(w.shape(), weight_gain(name)) as f32;
    Ok((Cow::Owned(w.map(|v| v * c)), b))
}

/// Bias, leaky ReLU and pixel norm in one pass, with the same arithmetic as the graph ops.
fn bias_act_norm(x: &mut Tensor<f32>, b: Option<&Tensor<f32>>) {
    let c = *x.shape().last().expect("NHWC activations");
    let zeros = vec![0.0; c];
    let b = b.map_or(&zeros[..], |b| b.data());
    let slope = f32::lit(nn::LEAKY_SLOPE);
    let inv_c = 1.0 / c as f32;
    let eps = f32::lit(nn::PIXEL_NORM_EPS);
    for px in x.data_mut().chunks_exact_mut(c) {
        let mut ss = 0.0f32;
        for (v, &bias) in px.iter_mut().zip(b) {
            *v += bias;
            *v *= if *v > 0.0 { 1.0 } else { slope };
            ss += *v * *v;
        }
        let inv = (ss * inv_c + eps).powf(-0.5);
        px.iter_mut().for_each(|v| *v *= inv);
    }
}

fn plain_conv(cfg: &GanConfig, p: &ParamSet<f32>, name: &str, x: &Tensor<f32>) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let (w, b) = plain_weight(cfg, p, name)?;
    Ok((k::conv2d(x, &w)?, b.clone()))
}

fn plain_to_rgb(cfg: &GanConfig, p: &ParamSet<f32>, s: usize, x: &Tensor<f32>) -> Result<Tensor<f32>> {
    let (y, b) = plain_conv(cfg, p, &format!("g/s{s}/to_rgb"), x)?;
    Ok(k::add_bias(&y, &b)?.map(f32::tanh))
}

/// Stage inputs are split into example tiles of at most this many bytes.
const TILE_BYTES: usize = 64 << 10;

fn plain_block(cfg: &GanConfig, p: &ParamSet<f32>, s: usize, x: &Tensor<f32>) -> Result<Tensor<f32>> {
    let up = k::upsample2x(x)?;
    let (mut a, b) = plain_conv(cfg, p, &format!("g/s{s}/conv0"), &up)?;
    drop(up);
    bias_act_norm(&mut a, Some(&b));
    let (mut y, b) = plain_conv(cfg, p, &format!("g/s{s}/conv1"), &a)?;
    bias_act_norm(&mut y, Some(&b));
    Ok(y)
}

fn map_tiles(x: &Tensor<f32>, budget: usize, f: impl Fn(&Tensor<f32>) -> Result<Tensor<f32>>) -> Result<Tensor<f32>> {
    let n = x.shape()[0];
    let per = (x.len() / n.max(1) * 4).max(1);
    let tile = (budget / per).clamp(1, n.max(1));
    if tile >= n {
        return f(x);
    }
    let parts = (0..n).step_by(tile).map(|i| f(&x.slice_rows(i, tile.min(n - i))?)).collect::<Result<Vec<_>>>()?;
    Tensor::stack_rows(&parts)
}

/// Tape-free [`generator`] for sampling: identical output, but intermediate
/// activations are dropped as soon as the next layer has consumed them.
pub fn generate_plain(
    cfg: &GanConfig,
    p: &ParamSet<f32>,
    z: &Tensor<f32>,
    pitch: &Tensor<f32>,
    stage: usize,
    alpha: f64,
) -> Result<Tensor<f32>> {
    check_stage(cfg, stage, alpha)?;
    let n = z.shape()[0];
    let (h0, w0) = cfg.base_shape;
    let x = k::concat_last(z, pitch)?;
    if x.rank() != 2 || x.shape()[1] != cfg.input_dim() {
        return Err(Error::shape("generator", format!("input {:?}, expected width {}", x.shape(), cfg.input_dim())));
    }
    let (w, b) = plain_weight(cfg, p, "g/s0/dense")?;
    let mut h = k::add_bias(&k::matmul(&x, &w, false, false)?, b)?.reshape(&[n, h0, w0, cfg.channels[0]])?;
    bias_act_norm(&mut h, None);
    let (mut h, b) = plain_conv(cfg, p, "g/s0/conv", &h)?;
    bias_act_norm(&mut h, Some(&b));
    if stage == 0 {
        return plain_to_rgb(cfg, p, 0, &h);
    }
    for s in 1..stage {
        h = map_tiles(&h, TILE_BYTES, |t| plain_block(cfg, p, s, t))?;
    }
    // to_rgb runs per tile so the top-resolution features are never held for the whole batch.
    let out = map_tiles(&h, TILE_BYTES, |t| plain_to_rgb(cfg, p, stage, &plain_block(cfg, p, stage, t)?))?;
    if alpha >= 1.0 {
        return Ok(out);
    }
    let old = k::upsample2x(&plain_to_rgb(cfg, p, stage - 1, &h)?)?;
    let (a, b) = (alpha as f32, (1.0 - alpha) as f32);
    k::zip_map("blend", &out, &old, |x, y| x * a + y * b)
}

/// Discriminator critic `[n, 1]` and pitch logits `[n, pitch_dim]` for images at `stage`.
pub fn discriminator<'g, T: Scalar>(
    cfg: &GanConfig,
    p: &Bound<'g, '_, T>,
    x: Var<'g, T>,
    stage: usize,
    alpha: f64,
    mut trace: Option<&mut ShapeTrace>,
) -> Result<(Var<'g, T>, Var<'g, T>)> {
    check_stage(cfg, stage, alpha)?;
    let (hs, ws) = cfg.resolution(stage);
    let shape = x.shape();
    if shape.len() != 4 || shape[1..] != [hs, ws, 2] {
        return Err(Error::shape("discriminator", format!("input {shape:?}, stage {stage} expects [n, {hs}, {ws}, 2]")));
    }
    record(&mut trace, "image", x);
    let mut h = conv(cfg, p, &format!("d/s{stage}/from_rgb"), x)?;
    record(&mut trace, &format!("d/s{stage}/from_rgb"), h);
    for s in (1..=stage).rev() {
        h = nn::leaky_relu(conv(cfg, p, &format!("d/s{s}/conv0"), h)?);
        record(&mut trace, &format!("d/s{s}/conv0"), h);
        h = nn::leaky_relu(conv(cfg, p, &format!("d/s{s}/conv1"), h)?);
        record(&mut trace, &format!("d/s{s}/conv1"), h);
        h = h.downsample2x()?;
        record(&mut trace, &format!("d/s{s}/downsample"), h);
        if s == stage && alpha < 1.0 {
            let skip = conv(cfg, p, &format!("d/s{}/from_rgb", s - 1), x.downsample2x()?)?;
            h = h.scale(T::lit(alpha)).add(skip.scale(T::lit(1.0 - alpha)))?;
        }
    }
    h = nn::minibatch_stddev(h)?;
    record(&mut trace, "concat(x, minibatch std.)", h);
    h = nn::leaky_relu(conv(cfg, p, "d/s0/conv0", h)?);
    record(&mut trace, "d/s0/conv0", h);
    h = nn::leaky_relu(conv(cfg, p, "d/s0/conv1", h)?);
    record(&mut trace, "d/s0/conv1", h);
    let n = h.shape()[0];
    let flat = h.reshape(&[n, h.value().len() / n])?;
    let cls = layer(cfg, p, "d/classifier")?;
    let logits = nn::dense(flat, cls.w, cls.b)?;
    record(&mut trace, "pitch classifier", logits);
    let crit = layer(cfg, p, "d/critic")?;
    let critic = nn::dense(flat, crit.w, crit.b)?;
    record(&mut trace, "discriminator output", critic);
    Ok((critic, logits))
}

/// `[n, pitch_dim]` one-hot rows for pitch-class indices.
pub fn one_hot<T: Scalar>(indices: &[usize], classes: usize) -> Result<Tensor<T>> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= classes) {
        return Err(Error::Invalid(format!("class index {bad} >= {classes}")));
    }
    let mut t = Tensor::zeros(&[indices.len(), classes]);
    for (r, &i) in indices.iter().enumerate() {
        t.data_mut()[r * classes + i] = T::one();
    }
    Ok(t)
}

/// Downsample full-resolution real images to `stage`, fading between the two
/// coarsest-available resolutions the same way the generator output is faded.
pub fn real_at_stage(cfg: &GanConfig, full: &Tensor<f32>, stage: usize, alpha: f64) -> Result<Tensor<f32>> {
    check_stage(cfg, stage, alpha)?;
    let mut x = full.clone();
    for _ in stage + 1..cfg.stage_count() {
        x = x.downsample2x()?;
    }
    if stage == 0 || alpha >= 1.0 {
        return Ok(x);
    }
    let coarse = x.downsample2x()?.upsample2x()?;
    let a = alpha as f32;
    Ok(Tensor::from_fn(x.shape(), |i| a * x.data()[i] + (1.0 - a) * coarse.data()[i]))
}
