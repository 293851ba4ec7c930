use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the second image channel carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    /// Wrapped phase scaled by 1/π.
    Phase,
    /// Instantaneous frequency: wrapped frame-to-frame phase advance scaled by 1/π.
    #[serde(rename = "if")]
    If,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreqScale {
    Linear,
    Mel,
}

/// Affine maps taking raw log-magnitude and channel-1 values into [-0.8, 0.8].
///
/// `normalized = (raw - shift) * scale`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mag_shift: f64,
    pub mag_scale: f64,
    pub ch1_shift: f64,
    pub ch1_scale: f64,
}

pub const NORM_TARGET: f64 = 0.8;

impl NormalizationStats {
    pub fn identity() -> Self {
        NormalizationStats { mag_shift: 0.0, mag_scale: 1.0, ch1_shift: 0.0, ch1_scale: 1.0 }
    }

    /// Stats mapping `[mag_min, mag_max]` and `[ch1_min, ch1_max]` onto ±0.8.
    pub fn from_ranges(mag_min: f64, mag_max: f64, ch1_min: f64, ch1_max: f64) -> Self {
        let (mag_shift, mag_scale) = affine_for(mag_min, mag_max);
        let (ch1_shift, ch1_scale) = affine_for(ch1_min, ch1_max);
        NormalizationStats { mag_shift, mag_scale, ch1_shift, ch1_scale }
    }

    pub fn normalize_mag(&self, raw: f64) -> f64 {
        (raw - self.mag_shift) * self.mag_scale
    }

    pub fn denormalize_mag(&self, v: f64) -> f64 {
        v / self.mag_scale + self.mag_shift
    }

    pub fn normalize_ch1(&self, raw: f64) -> f64 {
        (raw - self.ch1_shift) * self.ch1_scale
    }

    pub fn denormalize_ch1(&self, v: f64) -> f64 {
        v / self.ch1_scale + self.ch1_shift
    }
}

fn affine_for(min: f64, max: f64) -> (f64, f64) {
    let shift = 0.5 * (min + max);
    // a constant channel maps to 0
    let half = (0.5 * (max - min)).max(1e-12);
    (shift, NORM_TARGET / half)
}

/// Frame geometry, channel layout and normalization for one spectral representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationConfig {
    pub sample_rate: u32,
    /// Audio length the representation covers; shorter input is zero padded.
    pub num_samples: usize,
    pub frame_size: usize,
    pub stride: usize,
    /// Frame count after padding in time.
    pub num_frames: usize,
    pub channel1: ChannelMode,
    pub freq_scale: FreqScale,
    /// Magnitudes are clamped to this value before the log.
    pub log_mag_floor: f64,
    pub norm: Option<NormalizationStats>,
}

pub const SAMPLE_RATE: u32 = 16_000;
pub const NOTE_SAMPLES: usize = 64_000;
pub const LOG_MAG_FLOOR: f64 = 1e-6;

impl RepresentationConfig {
    fn new(
        frame_size: usize,
        num_frames: usize,
        num_samples: usize,
        channel1: ChannelMode,
        freq_scale: FreqScale,
    ) -> Self {
        RepresentationConfig {
            sample_rate: SAMPLE_RATE,
            num_samples,
            frame_size,
            stride: frame_size / 4,
            num_frames,
            channel1,
            freq_scale,
            log_mag_floor: LOG_MAG_FLOOR,
            norm: None,
        }
    }

    /// 1024-sample frames, 256 stride: (256, 512, 2) images of 4 s notes.
    pub fn low_res(channel1: ChannelMode, freq_scale: FreqScale) -> Self {
        Self::new(1024, 256, NOTE_SAMPLES, channel1, freq_scale)
    }

    /// 2048-sample frames, 512 stride: (128, 1024, 2) images of 4 s notes.
    pub fn high_res(channel1: ChannelMode, freq_scale: FreqScale) -> Self {
        Self::new(2048, 128, NOTE_SAMPLES, channel1, freq_scale)
    }

    /// Reduced geometry for CPU-scale training: 256-sample frames over 1024 samples,
    /// giving (16, 128, 2) images.
    pub fn desk(channel1: ChannelMode, freq_scale: FreqScale) -> Self {
        Self::new(256, 16, 1024, channel1, freq_scale)
    }

    /// Same frame geometry as `low_res` over a shorter excerpt.
    pub fn with_duration(mut self, num_samples: usize) -> Self {
        self.num_samples = num_samples;
        self.num_frames = Self::frames_needed(self.frame_size, self.stride, num_samples);
        self
    }

    pub fn with_norm(mut self, norm: NormalizationStats) -> Self {
        self.norm = Some(norm);
        self
    }

    fn frames_needed(frame_size: usize, stride: usize, num_samples: usize) -> usize {
        let padded = frame_size - stride + num_samples;
        1 + (padded.saturating_sub(frame_size)).div_ceil(stride)
    }

    /// Parse a preset name: `{phase|if}_{linear|mel}_{lowres|hires|desk}`.
    pub fn preset(name: &str) -> Result<Self> {
        let parts: Vec<&str> = name.split('_').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("unknown preset '{name}'")));
        }
        let mode = match parts[0] {
            "phase" => ChannelMode::Phase,
            "if" => ChannelMode::If,
            other => return Err(Error::Config(format!("unknown channel mode '{other}'"))),
        };
        let scale = match parts[1] {
            "linear" => FreqScale::Linear,
            "mel" => FreqScale::Mel,
            other => return Err(Error::Config(format!("unknown frequency scale '{other}'"))),
        };
        match parts[2] {
            "lowres" => Ok(Self::low_res(mode, scale)),
            "hires" => Ok(Self::high_res(mode, scale)),
            "desk" => Ok(Self::desk(mode, scale)),
            other => Err(Error::Config(format!("unknown resolution '{other}'"))),
        }
    }

    /// Frequency bins kept after dropping Nyquist.
    pub fn bins(&self) -> usize {
        self.frame_size / 2
    }

    /// Mel scaling keeps the bin count.
    pub fn mel_bins(&self) -> usize {
        self.bins()
    }

    pub fn image_shape(&self) -> [usize; 3] {
        [self.num_frames, self.bins(), 2]
    }

    /// Zeros placed ahead of the audio so every sample sees the full window overlap.
    pub fn lead_pad(&self) -> usize {
        self.frame_size - self.stride
    }

    pub fn padded_len(&self) -> usize {
        (self.num_frames - 1) * self.stride + self.frame_size
    }

    pub fn duration_secs(&self) -> f64 {
        self.num_samples as f64 / self.sample_rate as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_size < 8 || self.frame_size % 4 != 0 {
            return Err(Error::Config(format!("frame size {} must be a multiple of 4", self.frame_size)));
        }
        if self.stride * 4 != self.frame_size {
            return Err(Error::Config(format!(
                "stride {} must be frame_size/4 ({})",
                self.stride,
                self.frame_size / 4
            )));
        }
        if self.num_frames < 2 {
            return Err(Error::Config("need at least two frames".into()));
        }
        if self.padded_len() < self.lead_pad() + self.num_samples {
            return Err(Error::Config(format!(
                "{} frames of stride {} cannot cover {} samples",
                self.num_frames, self.stride, self.num_samples
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if !(self.log_mag_floor > 0.0) {
            return Err(Error::Config("log magnitude floor must be positive".into()));
        }
        Ok(())
    }

    pub fn norm(&self) -> Result<&NormalizationStats> {
        self.norm.as_ref().ok_or(Error::Unfitted)
    }
}
