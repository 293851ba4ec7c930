//! Progressive pitch-conditional GAN over spectral images.

mod config;
mod latent;
mod model;
pub mod network;
mod schedule;
mod train;

pub use config::{GanConfig, FULL_CHANNELS, LATENT_DIM};
pub use latent::{sample_latent, slerp};
pub use model::GanModel;
pub use network::ShapeTrace;
pub use schedule::TrainSchedule;
pub use train::{
    discriminator_objective, generator_objective, gradient_penalty, GanTrainer, Objective, RunOptions, StepReport,
    TrainingSet, CSV_HEADER,
};
