use serde::{Deserialize, Serialize};

/// Row-major frames × bins array of reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeFreq {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<f64>,
}

impl TimeFreq {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        TimeFreq { frames, bins, data: vec![0.0; frames * bins] }
    }

    pub fn from_vec(frames: usize, bins: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), frames * bins, "TimeFreq::from_vec length");
        TimeFreq { frames, bins, data }
    }

    #[inline]
    pub fn get(&self, frame: usize, bin: usize) -> f64 {
        self.data[frame * self.bins + bin]
    }

    #[inline]
    pub fn set(&mut self, frame: usize, bin: usize, v: f64) {
        self.data[frame * self.bins + bin] = v;
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.bins..(t + 1) * self.bins]
    }

    /// Values of one bin across time.
    pub fn bin_track(&self, bin: usize) -> Vec<f64> {
        (0..self.frames).map(|t| self.get(t, bin)).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        TimeFreq { frames: self.frames, bins: self.bins, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}
