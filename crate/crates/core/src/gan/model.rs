use std::path::Path;

use serde_json::json;

use super::config::GanConfig;
use super::network::{discriminator, generate_plain, generator, init_discriminator, init_generator, one_hot, ShapeTrace};
use crate::dataio::pitch_index;
use crate::error::{Error, Result};
use crate::spectral::{RepresentationConfig, SpectralImage};
use crate::tensor::{Graph, ParamSet, Tensor};

/// Generator and discriminator parameters plus their configuration.
#[derive(Clone, Debug)]
pub struct GanModel {
    pub cfg: GanConfig,
    pub gen: ParamSet<f32>,
    pub disc: ParamSet<f32>,
}

impl GanModel {
    pub fn new(cfg: GanConfig, seed: u64) -> Result<Self> {
        let gen = init_generator(&cfg, seed)?;
        let disc = init_discriminator(&cfg, seed ^ 0xD15C)?;
        Ok(GanModel { cfg, gen, disc })
    }

    /// Pitch one-hots for MIDI numbers.
    pub fn pitch_onehot(&self, pitches: &[i64]) -> Result<Tensor<f32>> {
        let idx = pitches.iter().map(|&p| pitch_index(p)).collect::<Result<Vec<_>>>()?;
        one_hot(&idx, self.cfg.pitch_dim)
    }

    /// One batched generator pass: `z` is `[n, latent]`, one pitch per row.
    pub fn generate_at(&self, z: &Tensor<f32>, pitches: &[i64], stage: usize, alpha: f64) -> Result<Tensor<f32>> {
        if z.rank() != 2 || z.shape()[0] != pitches.len() {
            return Err(Error::shape("generate", format!("latent {:?} for {} pitches", z.shape(), pitches.len())));
        }
        generate_plain(&self.cfg, &self.gen, z, &self.pitch_onehot(pitches)?, stage, alpha)
    }

    /// Final-stage images. `z` has one row per pitch, or a single row shared by all.
    pub fn generate(&self, pitches: &[i64], z: &Tensor<f32>) -> Result<Tensor<f32>> {
        if pitches.is_empty() {
            return Err(Error::Empty("pitch list"));
        }
        let z = if z.rank() == 2 && z.shape()[0] == 1 && pitches.len() > 1 {
            Tensor::stack_rows(&vec![z.clone(); pitches.len()])?
        } else {
            z.clone()
        };
        self.generate_at(&z, pitches, self.cfg.stage_count() - 1, 1.0)
    }

    /// Final-stage images wrapped as spectral images for `repr`.
    pub fn generate_images(&self, pitches: &[i64], z: &Tensor<f32>, repr: &RepresentationConfig) -> Result<Vec<SpectralImage>> {
        let [h, w, _] = self.cfg.output_shape();
        if repr.image_shape() != [h, w, 2] {
            return Err(Error::shape(
                "generate_images",
                format!("generator emits {:?}, representation expects {:?}", [h, w, 2], repr.image_shape()),
            ));
        }
        let out = self.generate(pitches, z)?;
        Ok(out
            .data()
            .chunks_exact(h * w * 2)
            .map(|chunk| SpectralImage { frames: h, bins: w, data: chunk.to_vec(), config: repr.clone() })
            .collect())
    }

    /// Layer shapes of a single-example pass through both networks at the final stage.
    pub fn shape_trace(&self) -> Result<(ShapeTrace, ShapeTrace)> {
        let stage = self.cfg.stage_count() - 1;
        let g = Graph::<f32>::new();
        let p = self.gen.bind(&g);
        let z = g.leaf(Tensor::zeros(&[2, self.cfg.latent_dim]));
        let pitch = g.leaf(Tensor::zeros(&[2, self.cfg.pitch_dim]));
        let mut gt = ShapeTrace::new();
        let img = generator(&self.cfg, &p, z, pitch, stage, 1.0, Some(&mut gt))?;
        drop(p);
        let d = self.disc.bind(&g);
        let mut dt = ShapeTrace::new();
        discriminator(&self.cfg, &d, img, stage, 1.0, Some(&mut dt))?;
        Ok((gt, dt))
    }

    pub fn save(&self, stem: &Path, meta: serde_json::Value) -> Result<()> {
        let mut all: Vec<(&str, &Tensor<f32>)> = self.gen.tensors().collect();
        all.extend(self.disc.tensors());
        let meta = json!({ "kind": "gan", "config": self.cfg, "extra": meta });
        crate::tensor::write_tensors(stem, &all, meta)
    }

    pub fn load(stem: &Path) -> Result<(Self, serde_json::Value)> {
        let (list, meta) = crate::tensor::read_tensors::<f32>(stem)?;
        let json_path = crate::tensor::container_paths(stem).1;
        if meta.get("kind").and_then(|k| k.as_str()) != Some("gan") {
            return Err(Error::format(json_path, "not a GAN checkpoint"));
        }
        let cfg: GanConfig =
            serde_json::from_value(meta["config"].clone()).map_err(|e| Error::format(&json_path, e))?;
        let mut model = GanModel::new(cfg, 0)?;
        let mut gen = ParamSet::new();
        let mut disc = ParamSet::new();
        for (name, t) in list {
            if name.starts_with("adam_") {
                continue;
            } else if name.starts_with("g/") {
                gen.insert(name, t)?;
            } else {
                disc.insert(name, t)?;
            }
        }
        model.gen.assign(&gen).map_err(|e| Error::format(&json_path, e))?;
        model.disc.assign(&disc).map_err(|e| Error::format(&json_path, e))?;
        Ok((model, meta["extra"].clone()))
    }
}
