use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pitch::{check_pitch, midi_to_hz};
use crate::error::Result;
use crate::spectral::Waveform;

/// Peak level of rendered notes.
pub const NOTE_PEAK: f32 = 0.9;
/// Harmonics are only rendered below this fraction of Nyquist.
pub const BAND_LIMIT: f64 = 0.9;

const ATTACK_SECS: f64 = 0.010;
const RELEASE_RAMP_SECS: f64 = 0.010;
/// Note-off point as a fraction of the note length (3 s of a 4 s note).
const NOTE_ON_FRACTION: f64 = 0.75;

/// Additive-synthesis timbre: the stand-in for an acoustic instrument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimbreParams {
    /// Relative amplitude of harmonic h+1.
    pub harmonics: Vec<f64>,
    /// Exponential decay rate in 1/s.
    pub decay: f64,
    /// Attack time in seconds.
    pub attack: f64,
    /// Stiffness coefficient B in f_h = h·f0·sqrt(1 + B·h²).
    pub inharmonicity: f64,
}

impl TimbreParams {
    /// A random but reproducible instrument.
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rolloff = rng.random_range(0.8..2.0);
        let odd_boost = rng.random_range(0.3..1.0);
        let harmonics = (1..=40)
            .map(|h| {
                let base = (h as f64).powf(-rolloff);
                let parity = if h % 2 == 1 { 1.0 } else { odd_boost };
                base * parity * rng.random_range(0.6..1.0)
            })
            .collect();
        TimbreParams {
            harmonics,
            decay: rng.random_range(0.5..3.0),
            attack: ATTACK_SECS,
            inharmonicity: rng.random_range(0.0..2e-4),
        }
    }
}

fn envelope(t: f64, duration: f64, timbre: &TimbreParams) -> f64 {
    let off = NOTE_ON_FRACTION * duration;
    let attack = timbre.attack.max(1e-6);
    let mut e = (t / attack).min(1.0) * (-timbre.decay * t).exp();
    if t >= off {
        let r = (t - off) / RELEASE_RAMP_SECS;
        e *= if r >= 1.0 { 0.0 } else { 0.5 + 0.5 * (PI * r).cos() };
    }
    e
}

/// Render a peak-normalized note of `len` samples.
///
/// Deterministic in `(pitch, timbre, seed)`; the seed only sets harmonic start phases
/// and a small per-harmonic amplitude jitter.
pub fn synth_note(pitch: i64, timbre: &TimbreParams, seed: u64, len: usize, sample_rate: u32) -> Result<Waveform> {
    check_pitch(pitch)?;
    let sr = sample_rate as f64;
    let f0 = midi_to_hz(pitch as f64);
    let nyquist = sr / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (pitch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));

    let partials: Vec<(f64, f64, f64)> = timbre
        .harmonics
        .iter()
        .enumerate()
        .filter_map(|(i, &amp)| {
            let h = (i + 1) as f64;
            let f = h * f0 * (1.0 + timbre.inharmonicity * h * h).sqrt();
            let phase = rng.random_range(0.0..2.0 * PI);
            let jitter = rng.random_range(0.9..1.1);
            (f < BAND_LIMIT * nyquist && amp > 0.0).then_some((f, amp * jitter, phase))
        })
        .collect();

    let duration = len as f64 / sr;
    let samples: Vec<f32> = (0..len)
        .map(|n| {
            let t = n as f64 / sr;
            let env = envelope(t, duration, timbre);
            if env == 0.0 {
                return 0.0;
            }
            let s: f64 = partials.iter().map(|&(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum();
            (env * s) as f32
        })
        .collect();
    let mut w = Waveform::new(samples, sample_rate);
    w.peak_normalize(NOTE_PEAK);
    Ok(w)
}

/// Pure sinusoid, useful for probing spectral properties.
pub fn sine_wave(freq: f64, amplitude: f64, len: usize, sample_rate: u32) -> Waveform {
    let sr = sample_rate as f64;
    let s = (0..len).map(|n| (amplitude * (2.0 * PI * freq * n as f64 / sr).sin()) as f32).collect();
    Waveform::new(s, sample_rate)
}
