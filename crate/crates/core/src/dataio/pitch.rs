use crate::error::{Error, Result};

pub const MIN_PITCH: i64 = 24;
pub const MAX_PITCH: i64 = 84;
/// Size of the pitch one-hot vector.
pub const NUM_PITCHES: usize = (MAX_PITCH - MIN_PITCH + 1) as usize;

pub fn check_pitch(pitch: i64) -> Result<()> {
    if (MIN_PITCH..=MAX_PITCH).contains(&pitch) {
        Ok(())
    } else {
        Err(Error::PitchOutOfRange(pitch))
    }
}

/// Class index of a MIDI pitch (pitch − 24).
pub fn pitch_index(pitch: i64) -> Result<usize> {
    check_pitch(pitch)?;
    Ok((pitch - MIN_PITCH) as usize)
}

pub fn index_pitch(index: usize) -> i64 {
    MIN_PITCH + index as i64
}

pub fn one_hot_pitch(pitch: i64) -> Result<Vec<f32>> {
    let mut v = vec![0.0; NUM_PITCHES];
    v[pitch_index(pitch)?] = 1.0;
    Ok(v)
}

pub fn midi_to_hz(pitch: f64) -> f64 {
    440.0 * 2f64.powf((pitch - 69.0) / 12.0)
}
