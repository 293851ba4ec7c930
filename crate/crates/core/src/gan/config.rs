use serde::{Deserialize, Serialize};

use crate::dataio::NUM_PITCHES;
use crate::error::{Error, Result};

pub const LATENT_DIM: usize = 256;

/// Per-stage channel counts of the full-size network, lowest resolution first.
pub const FULL_CHANNELS: [usize; 7] = [256, 256, 256, 256, 128, 64, 32];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub pitch_dim: usize,
    /// (frames, bins) at stage 0.
    pub base_shape: (usize, usize),
    /// Channels per stage, lowest resolution first; its length is the stage count.
    pub channels: Vec<usize>,
    pub scale_factor: f64,
    pub learning_rate: f64,
    pub acgan_weight: f64,
    pub gp_weight: f64,
    /// Weight of `mean D(real)²`, which keeps critic scores from drifting.
    #[serde(default)]
    pub drift_weight: f64,
    pub batch_size: usize,
    /// Examples spent fading in each new stage.
    pub blend_examples: u64,
    /// Examples spent at full strength in each stage.
    pub stable_examples: u64,
    pub progressive: bool,
    /// Run-time He scaling of weights (weights stored as unit normals).
    pub equalized_lr: bool,
}

impl GanConfig {
    /// Channel schedule of `FULL_CHANNELS` truncated to `stages` and multiplied by `scale`.
    pub fn scaled(base_shape: (usize, usize), stages: usize, scale: f64) -> Result<Self> {
        if stages == 0 || stages > FULL_CHANNELS.len() {
            return Err(Error::Config(format!("stage count {stages} outside 1..={}", FULL_CHANNELS.len())));
        }
        let channels = FULL_CHANNELS[..stages].iter().map(|&c| ((c as f64 * scale).round() as usize).max(1)).collect();
        let cfg = GanConfig {
            latent_dim: LATENT_DIM,
            pitch_dim: NUM_PITCHES,
            base_shape,
            channels,
            scale_factor: scale,
            learning_rate: 8e-4,
            acgan_weight: 10.0,
            gp_weight: 10.0,
            drift_weight: 1e-3,
            batch_size: 8,
            blend_examples: 800_000,
            stable_examples: 800_000,
            progressive: true,
            equalized_lr: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Full-size network for (128, 1024, 2) images.
    pub fn high_res() -> Self {
        Self::scaled((2, 16), 7, 1.0).expect("valid built-in config")
    }

    /// Full-size network for (256, 512, 2) images.
    pub fn low_res() -> Self {
        Self::scaled((4, 8), 7, 1.0).expect("valid built-in config")
    }

    /// CPU-scale network for (16, 128, 2) images.
    pub fn desk() -> Self {
        let mut cfg = Self::scaled((2, 16), 4, 1.0 / 8.0).expect("valid built-in config");
        cfg.blend_examples = 2_000;
        cfg.stable_examples = 2_000;
        cfg
    }

    pub fn stage_count(&self) -> usize {
        self.channels.len()
    }

    /// (frames, bins) produced at `stage`.
    pub fn resolution(&self, stage: usize) -> (usize, usize) {
        (self.base_shape.0 << stage, self.base_shape.1 << stage)
    }

    pub fn output_shape(&self) -> [usize; 3] {
        let (h, w) = self.resolution(self.stage_count() - 1);
        [h, w, 2]
    }

    pub fn input_dim(&self) -> usize {
        self.latent_dim + self.pitch_dim
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.channels.is_empty() || self.channels.contains(&0) {
            return bad(format!("invalid channel schedule {:?}", self.channels));
        }
        if self.base_shape.0 == 0 || self.base_shape.1 == 0 {
            return bad(format!("invalid base shape {:?}", self.base_shape));
        }
        if self.latent_dim == 0 || self.pitch_dim == 0 {
            return bad("latent and pitch dimensions must be positive".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch size {} < 2 leaves the minibatch stddev undefined", self.batch_size));
        }
        if !(self.learning_rate > 0.0) || self.acgan_weight < 0.0 || self.gp_weight < 0.0 || self.drift_weight < 0.0 {
            return bad("learning rate must be positive and loss weights nonnegative".into());
        }
        Ok(())
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "lowres" => Ok(Self::low_res()),
            "hires" => Ok(Self::high_res()),
            other => Err(Error::Config(format!("unknown GAN preset '{other}' (desk, lowres, hires)"))),
        }
    }
}
