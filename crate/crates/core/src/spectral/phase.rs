use std::f64::consts::PI;

use super::grid::TimeFreq;
use super::wrap_phase;
use crate::error::{Error, Result};

/// Unwrap along time, per bin: successive differences are folded into (-π, π].
pub fn unwrap_phase(phase: &TimeFreq) -> TimeFreq {
    let mut out = phase.clone();
    for t in 1..phase.frames {
        for k in 0..phase.bins {
            let d = wrap_phase(phase.get(t, k) - phase.get(t - 1, k));
            let prev = out.get(t - 1, k);
            out.set(t, k, prev + d);
        }
    }
    out
}

/// Instantaneous frequency in [-1, 1]: the wrapped phase advance per frame divided by π.
///
/// Frame 0 carries the initial phase (`phase[0] / π`) so the map is invertible.
pub fn phase_to_if(phase: &TimeFreq) -> Result<TimeFreq> {
    if phase.frames < 2 {
        return Err(Error::shape("phase_to_if", format!("{} frames, need at least 2", phase.frames)));
    }
    let mut out = TimeFreq::zeros(phase.frames, phase.bins);
    for k in 0..phase.bins {
        out.set(0, k, phase.get(0, k) / PI);
    }
    for t in 1..phase.frames {
        for k in 0..phase.bins {
            out.set(t, k, wrap_phase(phase.get(t, k) - phase.get(t - 1, k)) / PI);
        }
    }
    Ok(out)
}

/// Integrate instantaneous frequency back to wrapped phase.
pub fn if_to_phase(inst_freq: &TimeFreq) -> TimeFreq {
    let mut out = TimeFreq::zeros(inst_freq.frames, inst_freq.bins);
    if inst_freq.frames == 0 {
        return out;
    }
    for k in 0..inst_freq.bins {
        out.set(0, k, wrap_phase(inst_freq.get(0, k) * PI));
    }
    for t in 1..inst_freq.frames {
        for k in 0..inst_freq.bins {
            let p = out.get(t - 1, k) + inst_freq.get(t, k) * PI;
            out.set(t, k, wrap_phase(p));
        }
    }
    out
}
