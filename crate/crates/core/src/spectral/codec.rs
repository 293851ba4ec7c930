use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{ChannelMode, FreqScale, NormalizationStats, RepresentationConfig};
use super::grid::TimeFreq;
use super::mel::MelFilterbank;
use super::phase::{if_to_phase, phase_to_if};
use super::stft::{ComplexSpectrogram, StftPlan, Waveform};
use crate::error::{Error, Result};

/// Examples used by [`fit_normalization`] by default.
pub const NORM_FIT_EXAMPLES: usize = 100;

/// Normalized (frames × bins × 2) image: channel 0 log magnitude, channel 1 phase or IF.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralImage {
    pub frames: usize,
    pub bins: usize,
    /// Interleaved `[frame][bin][channel]`.
    pub data: Vec<f32>,
    pub config: RepresentationConfig,
}

impl SpectralImage {
    pub fn shape(&self) -> [usize; 3] {
        [self.frames, self.bins, 2]
    }

    pub fn channel(&self, c: usize) -> TimeFreq {
        let data = self.data.chunks_exact(2).map(|px| px[c] as f64).collect();
        TimeFreq::from_vec(self.frames, self.bins, data)
    }

    pub fn from_channels(mag: &TimeFreq, ch1: &TimeFreq, config: RepresentationConfig) -> Self {
        let mut data = Vec::with_capacity(mag.data.len() * 2);
        for (&a, &b) in mag.data.iter().zip(&ch1.data) {
            data.push(a as f32);
            data.push(b as f32);
        }
        SpectralImage { frames: mag.frames, bins: mag.bins, data, config }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Encoder/decoder bound to one representation.
pub struct Codec {
    cfg: RepresentationConfig,
    plan: StftPlan,
    mel: Option<Arc<MelFilterbank>>,
}

impl Codec {
    pub fn new(cfg: RepresentationConfig) -> Result<Self> {
        cfg.validate()?;
        let mel = match cfg.freq_scale {
            FreqScale::Linear => None,
            FreqScale::Mel => {
                if cfg.channel1 == ChannelMode::Phase {
                    return Err(Error::Config("mel scaling is only defined for the IF channel".into()));
                }
                Some(MelFilterbank::cached(cfg.bins(), cfg.mel_bins(), cfg.sample_rate, cfg.frame_size)?)
            }
        };
        let plan = StftPlan::new(cfg.frame_size);
        Ok(Codec { cfg, plan, mel })
    }

    pub fn config(&self) -> &RepresentationConfig {
        &self.cfg
    }

    pub fn stft(&self, w: &Waveform) -> Result<ComplexSpectrogram> {
        self.plan.stft(w, &self.cfg)
    }

    /// Log magnitude and phase/IF before normalization (after mel warping when configured).
    pub fn raw_channels(&self, w: &Waveform) -> Result<(TimeFreq, TimeFreq)> {
        let spec = self.stft(w)?;
        let floor = self.cfg.log_mag_floor;
        let log_mag = spec.magnitude.map(|m| m.max(floor).ln());
        let ch1 = match self.cfg.channel1 {
            ChannelMode::Phase => spec.phase.map(|p| p / PI),
            ChannelMode::If => phase_to_if(&spec.phase)?,
        };
        match &self.mel {
            Some(fb) => Ok((fb.forward(&log_mag)?, fb.forward(&ch1)?)),
            None => Ok((log_mag, ch1)),
        }
    }

    pub fn encode(&self, w: &Waveform) -> Result<SpectralImage> {
        let norm = *self.cfg.norm()?;
        let (log_mag, ch1) = self.raw_channels(w)?;
        let mag = log_mag.map(|v| norm.normalize_mag(v).clamp(-1.0, 1.0));
        let ch1 = ch1.map(|v| norm.normalize_ch1(v).clamp(-1.0, 1.0));
        Ok(SpectralImage::from_channels(&mag, &ch1, self.cfg.clone()))
    }

    /// Spectrogram implied by an image: denormalize, undo mel, exponentiate, integrate IF.
    pub fn to_spectrogram(&self, img: &SpectralImage) -> Result<ComplexSpectrogram> {
        let norm = *self.cfg.norm()?;
        if img.frames != self.cfg.num_frames || img.bins != self.cfg.bins() || img.data.len() != img.frames * img.bins * 2 {
            return Err(Error::shape(
                "decode",
                format!("image {:?} vs config {:?}", img.shape(), self.cfg.image_shape()),
            ));
        }
        if !img.is_finite() {
            return Err(Error::NonFinite("spectral image"));
        }
        let mut log_mag = img.channel(0).map(|v| norm.denormalize_mag(v));
        let mut ch1 = img.channel(1).map(|v| norm.denormalize_ch1(v));
        if let Some(fb) = &self.mel {
            log_mag = fb.inverse_unclamped(&log_mag)?;
            ch1 = fb.inverse_unclamped(&ch1)?.map(|v| v.clamp(-1.0, 1.0));
        }
        let magnitude = log_mag.map(f64::exp);
        let phase = match self.cfg.channel1 {
            ChannelMode::Phase => ch1.map(|v| super::wrap_phase(v * PI)),
            ChannelMode::If => if_to_phase(&ch1),
        };
        Ok(ComplexSpectrogram { magnitude, phase })
    }

    pub fn decode(&self, img: &SpectralImage) -> Result<Waveform> {
        let spec = self.to_spectrogram(img)?;
        self.plan.istft(&spec, &self.cfg)
    }

    /// Observed channel ranges over `sample`, mapped onto ±0.8.
    pub fn fit_normalization(&self, sample: &[Waveform]) -> Result<NormalizationStats> {
        if sample.is_empty() {
            return Err(Error::Empty("normalization sample"));
        }
        let (mut mag_lo, mut mag_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ch_lo, mut ch_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for w in sample.iter().take(NORM_FIT_EXAMPLES) {
            let (m, c) = self.raw_channels(w)?;
            let (a, b) = m.min_max();
            mag_lo = mag_lo.min(a);
            mag_hi = mag_hi.max(b);
            let (a, b) = c.min_max();
            ch_lo = ch_lo.min(a);
            ch_hi = ch_hi.max(b);
        }
        Ok(NormalizationStats::from_ranges(mag_lo, mag_hi, ch_lo, ch_hi))
    }
}

pub fn encode(w: &Waveform, cfg: &RepresentationConfig) -> Result<SpectralImage> {
    Codec::new(cfg.clone())?.encode(w)
}

pub fn decode(img: &SpectralImage) -> Result<Waveform> {
    Codec::new(img.config.clone())?.decode(img)
}

pub fn fit_normalization(sample: &[Waveform], cfg: &RepresentationConfig) -> Result<NormalizationStats> {
    Codec::new(cfg.clone())?.fit_normalization(sample)
}

#[derive(Serialize, Deserialize)]
struct ImageSidecar {
    shape: [usize; 3],
    dtype: String,
    config: RepresentationConfig,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Write flat little-endian f32 data to `path` and shape/config JSON to `path.json`.
pub fn write_image(img: &SpectralImage, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = img.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = ImageSidecar { shape: img.shape(), dtype: "float32-le".into(), config: img.config.clone() };
    let meta = sidecar_path(path);
    let json = serde_json::to_string_pretty(&side).map_err(|e| Error::format(&meta, e))?;
    fs::write(&meta, json).map_err(|e| Error::io(&meta, e))
}

pub fn read_image(path: &Path) -> Result<SpectralImage> {
    let meta = sidecar_path(path);
    let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
    let side: ImageSidecar = serde_json::from_str(&text).map_err(|e| Error::format(&meta, e))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let [frames, bins, ch] = side.shape;
    if ch != 2 || bytes.len() != frames * bins * 2 * 4 {
        return Err(Error::format(path, format!("{} bytes do not match shape {:?}", bytes.len(), side.shape)));
    }
    let data = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    Ok(SpectralImage { frames, bins, data, config: side.config })
}
