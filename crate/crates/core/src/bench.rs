//! Wall-clock latency of one-pass generation and spectral decoding.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gan::{sample_latent, GanModel};
use crate::spectral::{Codec, RepresentationConfig};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub repeats: usize,
    pub output_shape: [usize; 3],
    pub audio_seconds: f64,
    pub batch1_ms_per_sample: f64,
    pub batch_n: usize,
    pub batch_n_ms_per_sample: f64,
    /// Median latency until the first `t` output frames exist, per `t`.
    pub frames_latency_ms: Vec<(usize, f64)>,
    /// Per-sample spectral decode, measured apart from generation.
    pub decode_ms_per_sample: Option<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time_ms(mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let t = Instant::now();
    f()?;
    Ok(t.elapsed().as_secs_f64() * 1e3)
}

fn repeat_ms(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    f()?;
    let samples = (0..repeats.max(1)).map(|_| time_ms(&mut f)).collect::<Result<Vec<_>>>()?;
    Ok(median(samples))
}

impl BenchReport {
    /// Ratio of the slowest to the fastest entry of `frames_latency_ms`.
    pub fn frame_latency_spread(&self) -> f64 {
        let v: Vec<f64> = self.frames_latency_ms.iter().map(|&(_, ms)| ms).collect();
        let max = v.iter().copied().fold(f64::MIN, f64::max);
        let min = v.iter().copied().fold(f64::MAX, f64::min);
        max / min
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("output {:?} ({:.3} s of audio), median of {} runs", self.output_shape, self.audio_seconds, self.repeats),
            format!("generate batch 1:  {:.3} ms/sample", self.batch1_ms_per_sample),
            format!("generate batch {}: {:.3} ms/sample", self.batch_n, self.batch_n_ms_per_sample),
        ];
        for &(t, ms) in &self.frames_latency_ms {
            out.push(format!("first {t:>4} frames: {ms:.3} ms (one forward pass)"));
        }
        match self.decode_ms_per_sample {
            Some(ms) => out.push(format!("spectral decode:   {ms:.3} ms/sample")),
            None => out.push("spectral decode:   skipped (no normalization stats)".into()),
        }
        out
    }
}

/// Measure batched and unbatched generation, latency against output length, and decoding.
pub fn bench(model: &GanModel, repr: Option<&RepresentationConfig>, batch: usize, repeats: usize, seed: u64) -> Result<BenchReport> {
    let shape = model.cfg.output_shape();
    let pitch = 60;
    let z1 = sample_latent(1, model.cfg.latent_dim, seed);
    let zn = sample_latent(batch, model.cfg.latent_dim, seed ^ 1);
    let pitches = vec![pitch; batch];

    // Rounds alternate `batch` single calls with one batched call, so drifting
    // machine load hits both alike and each side runs warm.
    let one = || model.generate(&[pitch], &z1).map(drop);
    let mut many = || model.generate(&pitches, &zn).map(drop);
    one()?;
    many()?;
    let (mut t1, mut tn) = (Vec::new(), Vec::new());
    for _ in 0..repeats.max(1) {
        t1.push(time_ms(|| (0..batch).try_for_each(|_| one()))?);
        tn.push(time_ms(&mut many)?);
    }
    let (b1, bn) = (median(t1) / batch as f64, median(tn) / batch as f64);

    let frames = shape[0];
    let mut ts = vec![1, frames / 4, frames / 2, frames];
    ts.retain(|&t| t > 0);
    ts.dedup();
    let frame_cells = shape[1] * shape[2];
    let mut frames_latency_ms = Vec::new();
    for &t in &ts {
        let ms = repeat_ms(repeats, || {
            let out = model.generate(&[pitch], &z1)?;
            std::hint::black_box(&out.data()[..t * frame_cells]);
            Ok(())
        })?;
        frames_latency_ms.push((t, ms));
    }

    let (decode, audio_seconds) = match repr.filter(|r| r.norm.is_some() && r.image_shape() == shape) {
        Some(r) => {
            let codec = Codec::new(r.clone())?;
            let img = model.generate_images(&[pitch], &z1, r)?.remove(0);
            (Some(repeat_ms(repeats, || codec.decode(&img).map(drop))?), r.duration_secs())
        }
        None => (None, repr.map_or(0.0, |r| r.duration_secs())),
    };

    Ok(BenchReport {
        repeats,
        output_shape: shape,
        audio_seconds,
        batch1_ms_per_sample: b1,
        batch_n: batch,
        batch_n_ms_per_sample: bn,
        frames_latency_ms,
        decode_ms_per_sample: decode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
