use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::config::RepresentationConfig;
use super::grid::TimeFreq;
use super::wrap_phase;
use crate::error::{Error, Result};

/// Mono audio.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Waveform { samples, sample_rate }
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Waveform { samples: vec![0.0; len], sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }

    /// Scale so the largest absolute sample equals `target`. Silence is left alone.
    pub fn peak_normalize(&mut self, target: f32) {
        let peak = self.peak();
        if peak > 0.0 {
            let g = target / peak;
            self.samples.iter_mut().for_each(|s| *s *= g);
        }
    }
}

/// Magnitude and wrapped phase of an STFT with the Nyquist bin dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrogram {
    pub magnitude: TimeFreq,
    /// Radians in (-π, π].
    pub phase: TimeFreq,
}

impl ComplexSpectrogram {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        ComplexSpectrogram { magnitude: TimeFreq::zeros(frames, bins), phase: TimeFreq::zeros(frames, bins) }
    }

    pub fn frames(&self) -> usize {
        self.magnitude.frames
    }

    pub fn bins(&self) -> usize {
        self.magnitude.bins
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Reusable forward/inverse FFT plans for one frame geometry.
pub struct StftPlan {
    frame_size: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub fn new(frame_size: usize) -> Self {
        let mut planner = FftPlanner::new();
        StftPlan {
            frame_size,
            window: hann(frame_size),
            forward: planner.plan_fft_forward(frame_size),
            inverse: planner.plan_fft_inverse(frame_size),
        }
    }

    pub fn stft(&self, w: &Waveform, cfg: &RepresentationConfig) -> Result<ComplexSpectrogram> {
        cfg.validate()?;
        if cfg.frame_size != self.frame_size {
            return Err(Error::shape("stft", format!("plan {} vs config {}", self.frame_size, cfg.frame_size)));
        }
        if w.len() < cfg.frame_size {
            return Err(Error::TooShort { len: w.len(), needed: cfg.frame_size });
        }
        if w.len() > cfg.num_samples {
            return Err(Error::shape(
                "stft",
                format!("{} samples exceed the configured {}", w.len(), cfg.num_samples),
            ));
        }
        let n = cfg.frame_size;
        let bins = cfg.bins();
        let lead = cfg.lead_pad();
        let mut padded = vec![0.0f64; cfg.padded_len()];
        for (dst, &s) in padded[lead..].iter_mut().zip(&w.samples) {
            *dst = s as f64;
        }

        let mut out = ComplexSpectrogram::zeros(cfg.num_frames, bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for t in 0..cfg.num_frames {
            let start = t * cfg.stride;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(padded[start + i] * self.window[i], 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            let mag = out.magnitude.frame_mut(t);
            for k in 0..bins {
                mag[k] = buf[k].norm();
            }
            let ph = out.phase.frame_mut(t);
            for k in 0..bins {
                ph[k] = if buf[k].re == 0.0 && buf[k].im == 0.0 { 0.0 } else { wrap_phase(buf[k].arg()) };
            }
        }
        Ok(out)
    }

    pub fn istft(&self, s: &ComplexSpectrogram, cfg: &RepresentationConfig) -> Result<Waveform> {
        cfg.validate()?;
        let n = cfg.frame_size;
        if n != self.frame_size || s.frames() != cfg.num_frames || s.bins() != cfg.bins() {
            return Err(Error::shape(
                "istft",
                format!(
                    "spectrogram {}x{} vs config {}x{}",
                    s.frames(),
                    s.bins(),
                    cfg.num_frames,
                    cfg.bins()
                ),
            ));
        }
        let bins = cfg.bins();
        let mut acc = vec![0.0f64; cfg.padded_len()];
        let mut wsum = vec![0.0f64; cfg.padded_len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let scale = 1.0 / n as f64;
        for t in 0..cfg.num_frames {
            let mag = s.magnitude.frame(t);
            let ph = s.phase.frame(t);
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            // DC must be real for a real frame
            buf[0] = Complex64::new(mag[0] * ph[0].cos(), 0.0);
            for k in 1..bins {
                let c = Complex64::from_polar(mag[k], ph[k]);
                buf[k] = c;
                buf[n - k] = c.conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = t * cfg.stride;
            for i in 0..n {
                let w = self.window[i];
                acc[start + i] += buf[i].re * scale * w;
                wsum[start + i] += w * w;
            }
        }
        let lead = cfg.lead_pad();
        let samples = (lead..lead + cfg.num_samples)
            .map(|i| if wsum[i] > 1e-10 { (acc[i] / wsum[i]) as f32 } else { 0.0 })
            .collect();
        Ok(Waveform { samples, sample_rate: cfg.sample_rate })
    }
}

/// Hann-windowed STFT, zero padded in time to exactly `cfg.num_frames` frames.
pub fn stft(w: &Waveform, cfg: &RepresentationConfig) -> Result<ComplexSpectrogram> {
    StftPlan::new(cfg.frame_size).stft(w, cfg)
}

/// Weighted overlap-add inverse of [`stft`], returning `cfg.num_samples` samples.
pub fn istft(s: &ComplexSpectrogram, cfg: &RepresentationConfig) -> Result<Waveform> {
    StftPlan::new(cfg.frame_size).istft(s, cfg)
}

/// Signal-to-noise ratio of `estimate` against `reference` in dB over the shared extent.
pub fn snr_db(reference: &[f32], estimate: &[f32]) -> f64 {
    let (mut sig, mut err) = (0.0f64, 0.0f64);
    for (&r, &e) in reference.iter().zip(estimate) {
        sig += (r as f64).powi(2);
        err += (r as f64 - e as f64).powi(2);
    }
    if err == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (sig / err).log10()
}
