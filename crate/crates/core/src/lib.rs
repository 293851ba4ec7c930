//! Spectral audio representations with instantaneous frequency, a progressive
//! pitch-conditional GAN over them, and the metrics used to evaluate generated audio.

pub mod bench;
pub mod classifier;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod gan;
pub mod metrics;
pub mod pipeline;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
