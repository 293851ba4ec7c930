//! Sample-quality and diversity scores for generated audio.

mod fid;
mod ndb;
mod report;
mod scores;

pub use fid::{fid, frechet};
pub use ndb::{fit_ndb, kmeans, ndb, ndb_features, NdbModel, NdbResult, NDB_ALPHA, NDB_CELLS};
pub use report::{EvalOptions, EvalSets, MetricReport};
pub use scores::{argmax, entropy, inception_score, mean_example_entropy, pitch_accuracy, pitch_entropy};
