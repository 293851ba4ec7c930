//! Waveform ↔ spectral-image codecs: STFT, phase unwrapping, instantaneous frequency,
//! mel warping and range normalization.

mod codec;
mod config;
mod grid;
mod mel;
mod phase;
mod rainbow;
mod stft;

use std::f64::consts::PI;

pub use codec::{
    decode, encode, fit_normalization, read_image, sidecar_path, write_image, Codec, SpectralImage,
    NORM_FIT_EXAMPLES,
};
pub use config::{
    ChannelMode, FreqScale, NormalizationStats, RepresentationConfig, LOG_MAG_FLOOR, NOTE_SAMPLES,
    NORM_TARGET, SAMPLE_RATE,
};
pub use grid::TimeFreq;
pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank};
pub use rainbow::Rainbowgram;
pub use phase::{if_to_phase, phase_to_if, unwrap_phase};
pub use stft::{hann, istft, snr_db, stft, ComplexSpectrogram, StftPlan, Waveform};

/// Fold an angle into (-π, π].
#[inline]
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = x - two_pi * ((x - PI) / two_pi).ceil();
    // guard rounding at the lower boundary
    if w <= -PI {
        w + two_pi
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_interval() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-6.0) - (2.0 * PI - 6.0)).abs() < 1e-12);
        assert_eq!(wrap_phase(0.25), 0.25);
    }
}
