use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::codec::{Codec, SpectralImage};
use super::grid::TimeFreq;
use super::stft::Waveform;
use crate::error::{Error, Result};

/// RGB raster: `width` = frames, `height` = bins with the lowest bin on the bottom row.
#[derive(Clone, Debug, PartialEq)]
pub struct Rainbowgram {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

fn hsv(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor() as usize % 6;
    let f = h6 - h6.floor();
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i];
    [r, g, b].map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8)
}

impl Rainbowgram {
    /// Brightness is log magnitude scaled between `floor_log` and the image peak;
    /// hue is channel 1 in [-1, 1] wrapped once around the color wheel.
    pub fn from_channels(log_mag: &TimeFreq, ch1: &TimeFreq, floor_log: f64) -> Self {
        let (width, height) = (log_mag.frames, log_mag.bins);
        let peak = log_mag.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = peak - floor_log;
        let mut rgb = vec![0u8; width * height * 3];
        for t in 0..width {
            for b in 0..height {
                let v = if span > 1e-9 { ((log_mag.get(t, b) - floor_log) / span).clamp(0.0, 1.0) } else { 0.0 };
                let hue = 0.5 * (ch1.get(t, b).clamp(-1.0, 1.0) + 1.0);
                let row = height - 1 - b;
                rgb[(row * width + t) * 3..][..3].copy_from_slice(&hsv(hue, 1.0, v));
            }
        }
        Rainbowgram { width, height, rgb }
    }

    pub fn from_image(img: &SpectralImage) -> Result<Self> {
        let norm = img.config.norm()?;
        let mag = img.channel(0).map(|v| norm.denormalize_mag(v));
        let ch1 = img.channel(1).map(|v| norm.denormalize_ch1(v));
        Ok(Self::from_channels(&mag, &ch1, img.config.log_mag_floor.ln()))
    }

    pub fn from_waveform(w: &Waveform, codec: &Codec) -> Result<Self> {
        let (mag, ch1) = codec.raw_channels(w)?;
        Ok(Self::from_channels(&mag, &ch1, codec.config().log_mag_floor.ln()))
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::format(path, e))?;
        writer.write_image_data(&self.rgb).map_err(|e| Error::format(path, e))?;
        writer.finish().map_err(|e| Error::format(path, e))
    }
}
