//! Convolutional pitch classifier over the magnitude channel of spectral images.
//!
//! Four blocks of (3×3 conv, leaky ReLU, 2×2 mean pool), then a mean over the time
//! axis. The frequency axis is kept and flattened into a dense feature layer, so
//! absolute spectral position survives pooling; a 61-way dense layer follows.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataio::{mix_seed, NUM_PITCHES};
use crate::error::{Error, Result};
use crate::spectral::SpectralImage;
use crate::tensor::{nn, read_tensors, write_tensors, Adam, Bound, Graph, ParamSet, Scalar, Tensor, Var};

pub const BLOCKS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// (frames, bins) of the input images.
    pub input_shape: (usize, usize),
    /// Mean-pool factor applied to both axes before the first block.
    pub input_pool: usize,
    pub channels: [usize; BLOCKS],
    pub feature_dim: usize,
    pub classes: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl ClassifierConfig {
    pub fn for_images(frames: usize, bins: usize) -> Self {
        // Large images are pooled until at most 64 frames remain.
        let mut pool = 1;
        while frames / (pool * 2) >= 64 && bins / (pool * 2) >= 128 {
            pool *= 2;
        }
        ClassifierConfig {
            input_shape: (frames, bins),
            input_pool: pool,
            channels: [8, 16, 16, 32],
            feature_dim: 64,
            classes: NUM_PITCHES,
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 20,
        }
    }

    fn pooled(&self) -> (usize, usize) {
        (self.input_shape.0 / self.input_pool, self.input_shape.1 / self.input_pool)
    }

    /// Frequency cells left after the conv blocks.
    fn trunk_bins(&self) -> usize {
        self.pooled().1 >> BLOCKS
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.pooled();
        let need = 1 << BLOCKS;
        if self.input_pool == 0 || h % need != 0 || w % need != 0 || h == 0 || w == 0 {
            return Err(Error::Config(format!(
                "classifier input {:?} pooled by {} must be a nonzero multiple of {need} on both axes",
                self.input_shape, self.input_pool
            )));
        }
        if self.classes < 2 || self.feature_dim == 0 || self.batch_size == 0 {
            return Err(Error::Config("classifier needs ≥ 2 classes, nonzero feature width and batch".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PitchClassifier {
    pub cfg: ClassifierConfig,
    pub params: ParamSet<f32>,
}

/// Held-out outcome of [`PitchClassifier::train`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

fn add_layer(p: &mut ParamSet<f32>, rng: &mut ChaCha8Rng, name: &str, shape: &[usize]) -> Result<()> {
    let fan_in: usize = shape[..shape.len() - 1].iter().product();
    let std = (2.0 / fan_in as f64).sqrt();
    let w = Tensor::from_fn(shape, |_| {
        let z: f64 = StandardNormal.sample(rng);
        (z * std) as f32
    });
    p.insert(format!("{name}/w"), w)?;
    p.insert(format!("{name}/b"), Tensor::zeros(&[*shape.last().unwrap()]))
}

/// Stack the magnitude channel of images into `[n, frames, bins, 1]`.
pub fn magnitude_batch(images: &[SpectralImage]) -> Result<Tensor<f32>> {
    let first = images.first().ok_or(Error::Empty("image batch"))?;
    let (h, w) = (first.frames, first.bins);
    let mut data = Vec::with_capacity(images.len() * h * w);
    for img in images {
        if (img.frames, img.bins) != (h, w) {
            return Err(Error::shape("magnitude_batch", format!("{:?} vs {:?}", img.shape(), first.shape())));
        }
        data.extend(img.data.chunks_exact(2).map(|px| px[0]));
    }
    Tensor::new(&[images.len(), h, w, 1], data)
}

/// Magnitude channel of a `[n, H, W, 2]` generator batch as `[n, H, W, 1]`.
pub fn magnitude_of(images: &Tensor<f32>) -> Result<Tensor<f32>> {
    if images.rank() != 4 || images.shape()[3] != 2 {
        return Err(Error::shape("magnitude_of", format!("{:?}", images.shape())));
    }
    let s = images.shape();
    Tensor::new(&[s[0], s[1], s[2], 1], images.data().chunks_exact(2).map(|px| px[0]).collect())
}

impl PitchClassifier {
    pub fn new(cfg: ClassifierConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        let mut cin = 1;
        for (i, &c) in cfg.channels.iter().enumerate() {
            add_layer(&mut p, &mut rng, &format!("c/conv{i}"), &[3, 3, cin, c])?;
            cin = c;
        }
        add_layer(&mut p, &mut rng, "c/feature", &[cfg.trunk_bins() * cin, cfg.feature_dim])?;
        add_layer(&mut p, &mut rng, "c/logits", &[cfg.feature_dim, cfg.classes])?;
        Ok(PitchClassifier { cfg, params: p })
    }

    fn check_input(&self, x: &Tensor<f32>) -> Result<()> {
        let (h, w) = self.cfg.input_shape;
        if x.rank() != 4 || x.shape()[1..] != [h, w, 1] {
            return Err(Error::shape("classifier", format!("input {:?}, expected [n, {h}, {w}, 1]", x.shape())));
        }
        Ok(())
    }

    /// Feature activations `[n, feature_dim]` and logits `[n, classes]`.
    fn forward<'g, T: Scalar>(&self, p: &Bound<'g, '_, T>, x: Var<'g, T>) -> Result<(Var<'g, T>, Var<'g, T>)> {
        let mut h = x;
        let mut pool = self.cfg.input_pool;
        while pool > 1 {
            h = h.downsample2x()?;
            pool /= 2;
        }
        for i in 0..BLOCKS {
            let w = p.get(&format!("c/conv{i}/w"))?;
            let b = p.get(&format!("c/conv{i}/b"))?;
            h = nn::leaky_relu(nn::conv(h, w, b)?).downsample2x()?;
        }
        let s = h.shape();
        let (n, t) = (s[0], s[1]);
        let pooled = h.sum_axis(1)?.scale(T::one() / T::lit(t as f64));
        let flat = pooled.reshape(&[n, s[2] * s[3]])?;
        let feat = nn::leaky_relu(nn::dense(flat, p.get("c/feature/w")?, p.get("c/feature/b")?)?);
        let logits = nn::dense(feat, p.get("c/logits/w")?, p.get("c/logits/b")?)?;
        Ok((feat, logits))
    }

    fn run(&self, x: &Tensor<f32>) -> Result<(Tensor<f32>, Tensor<f32>)> {
        self.check_input(x)?;
        let g = Graph::new();
        let p = self.params.bind(&g);
        let (f, l) = self.forward(&p, g.leaf(x.clone()))?;
        let probs = l.softmax()?;
        let out = (f.value().as_ref().clone(), probs.value().as_ref().clone());
        Ok(out)
    }

    /// Class probabilities `[n, classes]` for magnitude inputs `[n, H, W, 1]`, in chunks.
    pub fn predict(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.chunked(x, |t| Ok(self.run(t)?.1))
    }

    /// Feature-layer activations `[n, feature_dim]`.
    pub fn features(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.chunked(x, |t| Ok(self.run(t)?.0))
    }

    fn chunked(&self, x: &Tensor<f32>, f: impl Fn(&Tensor<f32>) -> Result<Tensor<f32>>) -> Result<Tensor<f32>> {
        self.check_input(x)?;
        let n = x.shape()[0];
        let mut parts = Vec::new();
        for start in (0..n).step_by(64) {
            parts.push(f(&x.slice_rows(start, (n - start).min(64))?)?);
        }
        Tensor::stack_rows(&parts)
    }

    pub fn predict_images(&self, images: &[SpectralImage]) -> Result<Tensor<f32>> {
        self.predict(&magnitude_batch(images)?)
    }

    pub fn features_images(&self, images: &[SpectralImage]) -> Result<Tensor<f32>> {
        self.features(&magnitude_batch(images)?)
    }

    /// Fraction of rows whose argmax equals the label.
    pub fn accuracy(&self, x: &Tensor<f32>, labels: &[usize]) -> Result<f64> {
        let probs = self.predict(x)?;
        Ok(crate::metrics::pitch_accuracy(&probs, labels)?)
    }

    /// Mini-batch cross-entropy training with Adam; deterministic per `seed`.
    pub fn train(
        &mut self,
        x: &Tensor<f32>,
        labels: &[usize],
        held_out: Option<(&Tensor<f32>, &[usize])>,
        seed: u64,
        mut on_epoch: impl FnMut(usize, f64),
    ) -> Result<TrainSummary> {
        self.check_input(x)?;
        let n = labels.len();
        if x.shape()[0] != n {
            return Err(Error::shape("train_classifier", format!("{} images, {n} labels", x.shape()[0])));
        }
        let mut distinct = labels.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::Invalid(format!("classifier training needs ≥ 2 pitches, found {}", distinct.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.cfg.classes) {
            return Err(Error::Invalid(format!("label {bad} ≥ {} classes", self.cfg.classes)));
        }
        let mut opt = Adam::new(self.cfg.learning_rate).with_betas(0.9, 0.999);
        let mut last = f64::NAN;
        for epoch in 0..self.cfg.epochs {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, epoch as u64, 0)));
            let mut total = 0.0;
            for batch in order.chunks(self.cfg.batch_size) {
                let rows = batch.iter().map(|&i| x.slice_rows(i, 1)).collect::<Result<Vec<_>>>()?;
                let xb = Tensor::stack_rows(&rows)?;
                let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
                let (loss, grads) = {
                    let g = Graph::new();
                    let p = self.params.bind(&g);
                    let (_, logits) = self.forward(&p, g.leaf(xb))?;
                    let loss = logits.softmax_xent(&yb)?;
                    (loss.value().item() as f64, g.backward(loss, p.vars())?)
                };
                if !loss.is_finite() {
                    return Err(Error::NonFinite("classifier loss"));
                }
                total += loss * batch.len() as f64;
                opt.update(&mut self.params.tensors_mut(), &grads)?;
            }
            last = total / n as f64;
            on_epoch(epoch, last);
        }
        Ok(TrainSummary {
            epochs: self.cfg.epochs,
            final_loss: last,
            train_accuracy: self.accuracy(x, labels)?,
            test_accuracy: held_out.map(|(hx, hy)| self.accuracy(hx, hy)).transpose()?,
        })
    }

    pub fn save(&self, stem: &Path) -> Result<()> {
        let list: Vec<_> = self.params.tensors().collect();
        write_tensors(stem, &list, json!({ "kind": "classifier", "config": self.cfg }))
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let (list, meta) = read_tensors::<f32>(stem)?;
        let json_path = crate::tensor::container_paths(stem).1;
        if meta.get("kind").and_then(|k| k.as_str()) != Some("classifier") {
            return Err(Error::format(&json_path, "not a classifier checkpoint"));
        }
        let cfg: ClassifierConfig = serde_json::from_value(meta["config"].clone()).map_err(|e| Error::format(&json_path, e))?;
        let mut clf = PitchClassifier::new(cfg, 0)?;
        let mut set = ParamSet::new();
        for (name, t) in list {
            set.insert(name, t)?;
        }
        clf.params.assign(&set).map_err(|e| Error::format(&json_path, e))?;
        Ok(clf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ClassifierConfig {
        let mut cfg = ClassifierConfig::for_images(16, 32);
        cfg.classes = 4;
        cfg.feature_dim = 8;
        cfg
    }

    #[test]
    fn outputs_are_simplex_rows() {
        let clf = PitchClassifier::new(small(), 1).unwrap();
        let x = Tensor::from_fn(&[5, 16, 32, 1], |i| ((i * 7919) % 97) as f32 / 97.0 - 0.5);
        let p = clf.predict(&x).unwrap();
        assert_eq!(p.shape(), &[5, 4]);
        for row in p.data().chunks(4) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        }
        assert_eq!(clf.features(&x).unwrap().shape(), &[5, 8]);
    }

    #[test]
    fn rejects_single_class_and_bad_shapes() {
        let mut clf = PitchClassifier::new(small(), 1).unwrap();
        let x = Tensor::zeros(&[2, 16, 32, 1]);
        assert!(clf.train(&x, &[1, 1], None, 0, |_, _| {}).is_err());
        assert!(clf.predict(&Tensor::zeros(&[2, 16, 16, 1])).is_err());
    }

    #[test]
    fn large_inputs_are_pooled() {
        assert_eq!(ClassifierConfig::for_images(256, 512).input_pool, 4);
        assert_eq!(ClassifierConfig::for_images(128, 1024).input_pool, 2);
        assert_eq!(ClassifierConfig::for_images(16, 128).input_pool, 1);
    }
}
