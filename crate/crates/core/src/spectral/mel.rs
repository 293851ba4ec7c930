use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use super::grid::TimeFreq;
use crate::error::{Error, Result};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Singular values below this fraction of the largest are treated as zero in the pseudo-inverse.
const PINV_RCOND: f64 = 1e-6;

/// Square-ish triangular filterbank with mel-spaced centres from 0 Hz to the top linear bin.
///
/// Each filter is at least one linear bin wide on either side of its centre, so every row
/// touches some linear bin; rows are normalized to sum to 1.
pub struct MelFilterbank {
    bins: usize,
    mel_bins: usize,
    /// mel_bins × bins, row-major
    weights: Vec<f64>,
    pinv: OnceLock<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(bins: usize, mel_bins: usize, sample_rate: u32, frame_size: usize) -> Result<Self> {
        if bins < 2 || mel_bins < 2 {
            return Err(Error::Config("mel filterbank needs at least two bins".into()));
        }
        let df = sample_rate as f64 / frame_size as f64;
        let f_top = (bins - 1) as f64 * df;
        let mel_top = hz_to_mel(f_top);
        let step = mel_top / (mel_bins - 1) as f64;
        let centre = |j: isize| mel_to_hz(j as f64 * step);

        let mut weights = vec![0.0; mel_bins * bins];
        for j in 0..mel_bins {
            let c = centre(j as isize);
            let left = (c - centre(j as isize - 1)).max(df);
            let right = (centre(j as isize + 1) - c).max(df);
            let row = &mut weights[j * bins..(j + 1) * bins];
            let lo = (((c - left) / df).floor().max(0.0)) as usize;
            let hi = (((c + right) / df).ceil() as usize).min(bins - 1);
            for (k, w) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let f = k as f64 * df;
                let v = if f <= c { 1.0 - (c - f) / left } else { 1.0 - (f - c) / right };
                *w = v.max(0.0);
            }
            let total: f64 = row.iter().sum();
            debug_assert!(total > 0.0);
            row.iter_mut().for_each(|w| *w /= total);
        }
        Ok(MelFilterbank { bins, mel_bins, weights, pinv: OnceLock::new() })
    }

    /// Shared instance for a frame geometry; the pseudo-inverse is computed at most once.
    pub fn cached(bins: usize, mel_bins: usize, sample_rate: u32, frame_size: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize, u32, usize), Arc<MelFilterbank>>>> =
            OnceLock::new();
        let key = (bins, mel_bins, sample_rate, frame_size);
        let cache = CACHE.get_or_init(Default::default);
        if let Some(fb) = cache.lock().expect("mel cache poisoned").get(&key) {
            return Ok(fb.clone());
        }
        let fb = Arc::new(Self::new(bins, mel_bins, sample_rate, frame_size)?);
        cache.lock().expect("mel cache poisoned").entry(key).or_insert(fb.clone());
        Ok(fb)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn mel_bins(&self) -> usize {
        self.mel_bins
    }

    /// Row `j` holds the weights of mel filter `j` over the linear bins.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Moore–Penrose pseudo-inverse, bins × mel_bins row-major.
    pub fn pseudo_inverse(&self) -> &[f64] {
        self.pinv.get_or_init(|| {
            let m = DMatrix::from_row_slice(self.mel_bins, self.bins, &self.weights);
            let svd = m.svd(true, true);
            let smax = svd.singular_values.max();
            let p = svd.pseudo_inverse(smax * PINV_RCOND).expect("svd computed with u and v");
            let mut out = vec![0.0; self.bins * self.mel_bins];
            for r in 0..self.bins {
                for c in 0..self.mel_bins {
                    out[r * self.mel_bins + c] = p[(r, c)];
                }
            }
            out
        })
    }

    /// Linear → mel, frame by frame.
    pub fn forward(&self, linear: &TimeFreq) -> Result<TimeFreq> {
        if linear.bins != self.bins {
            return Err(Error::shape("mel_forward", format!("{} bins, filterbank expects {}", linear.bins, self.bins)));
        }
        Ok(apply(&self.weights, self.mel_bins, linear))
    }

    /// Mel → linear through the pseudo-inverse without clamping.
    pub fn inverse_unclamped(&self, mel: &TimeFreq) -> Result<TimeFreq> {
        if mel.bins != self.mel_bins {
            return Err(Error::shape("mel_inverse", format!("{} bins, filterbank expects {}", mel.bins, self.mel_bins)));
        }
        Ok(apply(self.pseudo_inverse(), self.bins, mel))
    }

    /// Mel magnitudes → linear magnitudes; negative values from the pseudo-inverse are clamped to 0.
    pub fn inverse(&self, mel: &TimeFreq) -> Result<TimeFreq> {
        Ok(self.inverse_unclamped(mel)?.map(|v| v.max(0.0)))
    }
}

fn apply(matrix: &[f64], out_bins: usize, input: &TimeFreq) -> TimeFreq {
    let in_bins = input.bins;
    let mut out = TimeFreq::zeros(input.frames, out_bins);
    for t in 0..input.frames {
        let x = input.frame(t);
        let y = out.frame_mut(t);
        for (j, yj) in y.iter_mut().enumerate() {
            let row = &matrix[j * in_bins..(j + 1) * in_bins];
            *yj = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
    out
}
