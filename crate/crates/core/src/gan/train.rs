use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::GanConfig;
use super::latent::sample_latent;
use super::model::GanModel;
use super::network::{discriminator, generator, one_hot, real_at_stage};
use super::schedule::TrainSchedule;
use crate::dataio::mix_seed;
use crate::error::{Error, Result};
use crate::tensor::{read_tensors, write_tensors, Adam, Bound, Graph, ParamSet, Scalar, Tensor, Var};

pub const CSV_HEADER: &str = "step,d_loss,g_loss,gp,acgan_real,acgan_fake,alpha,stage";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub stage: usize,
    pub alpha: f64,
    pub d_loss: f64,
    pub g_loss: f64,
    pub gp: f64,
    pub acgan_real: f64,
    pub acgan_fake: f64,
}

impl StepReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step, self.d_loss, self.g_loss, self.gp, self.acgan_real, self.acgan_fake, self.alpha, self.stage
        )
    }

    fn is_finite(&self) -> bool {
        [self.d_loss, self.g_loss, self.gp, self.acgan_real, self.acgan_fake].iter().all(|v| v.is_finite())
    }
}

/// Mean over the batch of `(‖∇D(x̂)‖ − 1)²` with `x̂ = ε·real + (1 − ε)·fake`, one ε per example.
pub fn gradient_penalty<'g, T: Scalar>(
    graph: &'g Graph<T>,
    critic: impl Fn(Var<'g, T>) -> Result<Var<'g, T>>,
    real: &Tensor<T>,
    fake: &Tensor<T>,
    eps: &[f64],
) -> Result<Var<'g, T>> {
    if real.shape() != fake.shape() || real.shape().first() != Some(&eps.len()) {
        return Err(Error::shape(
            "gradient_penalty",
            format!("real {:?}, fake {:?}, {} mixing weights", real.shape(), fake.shape(), eps.len()),
        ));
    }
    let n = eps.len();
    let per = real.len() / n.max(1);
    let mixed = Tensor::from_fn(real.shape(), |i| {
        let e = T::lit(eps[i / per]);
        e * real.data()[i] + (T::one() - e) * fake.data()[i]
    });
    let x = graph.leaf(mixed);
    let d = critic(x)?;
    let gx = graph.grad(d.sum_all(), &[x])?[0].ok_or_else(|| Error::Invalid("critic ignores its input".into()))?;
    let norm = gx.mul(gx)?.reshape(&[n, per])?.sum_axis(1)?.add_scalar(T::lit(1e-12)).powf(T::lit(0.5));
    Ok(norm.add_scalar(-T::one()).powf(T::lit(2.0)).mean_all())
}

/// Encoded real images `[N, H, W, 2]` at full resolution with pitch-class labels.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
}

impl TrainingSet {
    pub fn new(images: Tensor<f32>, labels: Vec<usize>) -> Result<Self> {
        if images.rank() != 4 || images.shape()[0] != labels.len() || labels.is_empty() {
            return Err(Error::shape("training_set", format!("images {:?} with {} labels", images.shape(), labels.len())));
        }
        Ok(TrainingSet { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn batch(&self, idx: &[usize]) -> Result<(Tensor<f32>, Vec<usize>)> {
        let rows = idx.iter().map(|&i| self.images.slice_rows(i, 1)).collect::<Result<Vec<_>>>()?;
        Ok((Tensor::stack_rows(&rows)?, idx.iter().map(|&i| self.labels[i]).collect()))
    }
}

/// Where and how often [`GanTrainer::run`] writes logs and checkpoints.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub steps: u64,
    pub out_dir: PathBuf,
    pub checkpoint_every: u64,
}

pub struct GanTrainer {
    pub model: GanModel,
    pub schedule: TrainSchedule,
    opt_g: Adam<f32>,
    opt_d: Adam<f32>,
    pub step: u64,
    pub seen: u64,
    seed: u64,
    /// Free-form JSON stored with every checkpoint.
    pub notes: serde_json::Value,
}

/// A loss together with the terms reported alongside it.
pub struct Objective<'g> {
    pub loss: Var<'g, f32>,
    pub gp: Var<'g, f32>,
    pub acgan: Var<'g, f32>,
}

/// `mean D(fake) − mean D(real) + gp_weight·GP + drift_weight·mean D(real)² + acgan_weight·XE(classifier(real))`.
#[allow(clippy::too_many_arguments)]
pub fn discriminator_objective<'g>(
    cfg: &GanConfig,
    p: &Bound<'g, '_, f32>,
    real: &Tensor<f32>,
    fake: &Tensor<f32>,
    labels: &[usize],
    eps: &[f64],
    stage: usize,
    alpha: f64,
) -> Result<Objective<'g>> {
    let g = p.vars().first().ok_or(Error::Empty("discriminator parameters"))?.graph();
    let (cr, lr) = discriminator(cfg, p, g.leaf(real.clone()), stage, alpha, None)?;
    let (cf, _) = discriminator(cfg, p, g.leaf(fake.clone()), stage, alpha, None)?;
    let gp = gradient_penalty(g, |x| Ok(discriminator(cfg, p, x, stage, alpha, None)?.0), real, fake, eps)?;
    let acgan = lr.softmax_xent(labels)?;
    let mut loss = cf.mean_all().sub(cr.mean_all())?.add(gp.scale(cfg.gp_weight as f32))?;
    if cfg.drift_weight != 0.0 {
        loss = loss.add(cr.mul(cr)?.mean_all().scale(cfg.drift_weight as f32))?;
    }
    if cfg.acgan_weight != 0.0 {
        loss = loss.add(acgan.scale(cfg.acgan_weight as f32))?;
    }
    Ok(Objective { loss, gp, acgan })
}

/// `−mean D(G(z)) + acgan_weight·XE(classifier(G(z)), labels)`; `gp` is reported as zero.
#[allow(clippy::too_many_arguments)]
pub fn generator_objective<'g>(
    cfg: &GanConfig,
    pg: &Bound<'g, '_, f32>,
    pd: &Bound<'g, '_, f32>,
    z: Var<'g, f32>,
    onehot: Var<'g, f32>,
    labels: &[usize],
    stage: usize,
    alpha: f64,
) -> Result<Objective<'g>> {
    let fake = generator(cfg, pg, z, onehot, stage, alpha, None)?;
    let (cf, lf) = discriminator(cfg, pd, fake, stage, alpha, None)?;
    let acgan = lf.softmax_xent(labels)?;
    let mut loss = cf.mean_all().scale(-1.0);
    if cfg.acgan_weight != 0.0 {
        loss = loss.add(acgan.scale(cfg.acgan_weight as f32))?;
    }
    let gp = z.graph().leaf(Tensor::scalar(0.0));
    Ok(Objective { loss, gp, acgan })
}

impl GanTrainer {
    pub fn new(model: GanModel, seed: u64) -> Self {
        let cfg = &model.cfg;
        let schedule = TrainSchedule {
            stages: cfg.stage_count(),
            blend: cfg.blend_examples,
            stable: cfg.stable_examples,
            progressive: cfg.progressive,
        };
        let lr = cfg.learning_rate;
        GanTrainer { schedule, opt_g: Adam::new(lr), opt_d: Adam::new(lr), model, step: 0, seen: 0, seed, notes: serde_json::Value::Null }
    }

    /// (stage, α) for the next step.
    pub fn position(&self) -> (usize, f64) {
        self.schedule.at(self.seen)
    }

    /// One discriminator update followed by one generator update on a full-resolution batch.
    pub fn train_step(&mut self, real_full: &Tensor<f32>, labels: &[usize]) -> Result<StepReport> {
        let cfg = self.model.cfg.clone();
        let n = labels.len();
        if real_full.rank() != 4 || real_full.shape()[0] != n {
            return Err(Error::shape("train_step", format!("batch {:?} with {n} labels", real_full.shape())));
        }
        let (stage, alpha) = self.position();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, self.step, 1));
        let real = real_at_stage(&cfg, real_full, stage, alpha)?;
        let onehot = one_hot::<f32>(labels, cfg.pitch_dim)?;

        let z = sample_latent(n, cfg.latent_dim, rng.next_u64());
        let fake = {
            let g = Graph::new();
            let p = self.model.gen.bind(&g);
            let out = generator(&cfg, &p, g.leaf(z), g.leaf(onehot.clone()), stage, alpha, None)?;
            out.value().as_ref().clone()
        };
        let eps: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let (d_loss, gp, ac_real, d_grads) = {
            let g = Graph::new();
            let p = self.model.disc.bind(&g);
            let obj = discriminator_objective(&cfg, &p, &real, &fake, labels, &eps, stage, alpha)?;
            let grads = g.backward(obj.loss, p.vars())?;
            (obj.loss.value().item(), obj.gp.value().item(), obj.acgan.value().item(), grads)
        };

        let z = sample_latent(n, cfg.latent_dim, rng.next_u64());
        let (g_loss, ac_fake, g_grads) = {
            let g = Graph::new();
            let pg = self.model.gen.bind(&g);
            let pd = self.model.disc.bind(&g);
            let obj = generator_objective(&cfg, &pg, &pd, g.leaf(z), g.leaf(onehot), labels, stage, alpha)?;
            let grads = g.backward(obj.loss, pg.vars())?;
            (obj.loss.value().item(), obj.acgan.value().item(), grads)
        };

        let report = StepReport {
            step: self.step,
            stage,
            alpha,
            d_loss: d_loss as f64,
            g_loss: g_loss as f64,
            gp: gp as f64,
            acgan_real: ac_real as f64,
            acgan_fake: ac_fake as f64,
        };
        let grads_finite = d_grads.iter().chain(&g_grads).all(Tensor::all_finite);
        if !report.is_finite() || !grads_finite {
            return Err(Error::Diverged { step: self.step, snapshot: format!("{report:?}, finite gradients: {grads_finite}") });
        }
        self.opt_d.update(&mut self.model.disc.tensors_mut(), &d_grads)?;
        self.opt_g.update(&mut self.model.gen.tensors_mut(), &g_grads)?;
        self.step += 1;
        self.seen += n as u64;
        Ok(report)
    }

    /// Draw this step's batch from `data` and train on it.
    pub fn train_on(&mut self, data: &TrainingSet) -> Result<StepReport> {
        let bs = self.model.cfg.batch_size;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, self.step, 2));
        let idx: Vec<usize> = if data.len() >= bs {
            sample(&mut rng, data.len(), bs).into_vec()
        } else {
            (0..bs).map(|_| rng.random_range(0..data.len())).collect()
        };
        let (images, labels) = data.batch(&idx)?;
        self.train_step(&images, &labels)
    }

    /// Train for `opts.steps` more steps, appending to `losses.csv` and checkpointing
    /// every `checkpoint_every` steps, at stage changes and at the end.
    pub fn run(&mut self, data: &TrainingSet, opts: &RunOptions, mut on_step: impl FnMut(&StepReport)) -> Result<Vec<StepReport>> {
        std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
        let csv_path = opts.out_dir.join("losses.csv");
        let fresh = !csv_path.exists();
        let mut csv = OpenOptions::new().create(true).append(true).open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        if fresh {
            writeln!(csv, "{CSV_HEADER}").map_err(|e| Error::io(&csv_path, e))?;
        }
        let mut reports = Vec::new();
        let end = self.step + opts.steps;
        while self.step < end {
            let stage_before = self.position().0;
            let report = self.train_on(data)?;
            writeln!(csv, "{}", report.csv_row()).map_err(|e| Error::io(&csv_path, e))?;
            on_step(&report);
            reports.push(report);
            let stage_changed = self.position().0 != stage_before;
            let periodic = opts.checkpoint_every > 0 && self.step % opts.checkpoint_every == 0;
            if periodic || stage_changed || self.step == end {
                self.save(&opts.out_dir.join(format!("ckpt_{:07}", self.step)))?;
                self.save(&opts.out_dir.join("latest"))?;
            }
        }
        csv.flush().map_err(|e| Error::io(&csv_path, e))?;
        Ok(reports)
    }

    /// Model, optimizer moments and schedule position in one container.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let mut all: Vec<(String, &Tensor<f32>)> = Vec::new();
        for (name, t) in self.model.gen.tensors().chain(self.model.disc.tensors()) {
            all.push((name.to_string(), t));
        }
        for (tag, opt, set) in [("g", &self.opt_g, &self.model.gen), ("d", &self.opt_d, &self.model.disc)] {
            let (m, v) = opt.moments();
            for ((name, mt), vt) in set.names().iter().zip(m).zip(v) {
                all.push((format!("adam_{tag}/m/{name}"), mt));
                all.push((format!("adam_{tag}/v/{name}"), vt));
            }
        }
        let list: Vec<(&str, &Tensor<f32>)> = all.iter().map(|(n, t)| (n.as_str(), *t)).collect();
        let meta = json!({
            "kind": "gan",
            "config": self.model.cfg,
            "extra": {
                "step": self.step,
                "seen": self.seen,
                "seed": self.seed,
                "adam_g_step": self.opt_g.step_count(),
                "adam_d_step": self.opt_d.step_count(),
                "notes": self.notes,
            },
        });
        write_tensors(stem, &list, meta)
    }

    /// Resume from a container written by [`GanTrainer::save`].
    pub fn load(stem: &Path) -> Result<Self> {
        let (model, extra) = GanModel::load(stem)?;
        let json_path = crate::tensor::container_paths(stem).1;
        let field = |k: &str| {
            extra.get(k).and_then(|v| v.as_u64()).ok_or_else(|| Error::format(&json_path, format!("missing {k}")))
        };
        let mut trainer = GanTrainer::new(model, field("seed")?);
        trainer.step = field("step")?;
        trainer.seen = field("seen")?;
        trainer.notes = extra.get("notes").cloned().unwrap_or_default();
        let (list, _) = read_tensors::<f32>(stem)?;
        let lookup = |prefix: &str, set: &ParamSet<f32>| -> Result<Option<(Vec<Tensor<f32>>, Vec<Tensor<f32>>)>> {
            let find = |name: String| list.iter().find(|(n, _)| *n == name).map(|(_, t)| t.clone());
            let mut m = Vec::new();
            let mut v = Vec::new();
            for name in set.names() {
                match (find(format!("{prefix}/m/{name}")), find(format!("{prefix}/v/{name}"))) {
                    (Some(a), Some(b)) => {
                        m.push(a);
                        v.push(b);
                    }
                    _ => return Ok(None),
                }
            }
            Ok(Some((m, v)))
        };
        if let Some((m, v)) = lookup("adam_g", &trainer.model.gen)? {
            trainer.opt_g.restore(field("adam_g_step")?, m, v)?;
        }
        if let Some((m, v)) = lookup("adam_d", &trainer.model.disc)? {
            trainer.opt_d.restore(field("adam_d_step")?, m, v)?;
        }
        Ok(trainer)
    }
}
