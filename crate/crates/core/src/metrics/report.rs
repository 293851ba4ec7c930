use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{fid, fit_ndb, inception_score, pitch_accuracy, pitch_entropy, ndb_features, NdbResult};
use crate::classifier::PitchClassifier;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// The five evaluation scores for one generated set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ndb: usize,
    pub ndb_k: usize,
    pub fid: f64,
    pub is_score: f64,
    pub pitch_accuracy: f64,
    pub pitch_entropy: f64,
    pub n_train: usize,
    pub n_reference: usize,
    pub n_generated: usize,
    pub config: serde_json::Value,
}

/// Inputs are magnitude batches `[n, H, W, 1]`.
pub struct EvalSets<'a> {
    /// Clustered for NDB.
    pub train: &'a Tensor<f32>,
    /// Compared against in classifier feature space for FID.
    pub reference: &'a Tensor<f32>,
    pub generated: &'a Tensor<f32>,
    pub generated_labels: &'a [usize],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalOptions {
    pub k: usize,
    pub ndb_pool: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { k: super::NDB_CELLS, ndb_pool: 4, seed: 0 }
    }
}

impl MetricReport {
    pub fn compute(clf: &PitchClassifier, sets: &EvalSets, opts: &EvalOptions) -> Result<(Self, NdbResult)> {
        let model = fit_ndb(&ndb_features(sets.train, opts.ndb_pool)?, opts.k, opts.seed)?;
        let cells = model.evaluate(&ndb_features(sets.generated, opts.ndb_pool)?)?;
        let probs = clf.predict(sets.generated)?;
        let report = MetricReport {
            ndb: cells.count,
            ndb_k: opts.k,
            fid: fid(&clf.features(sets.reference)?, &clf.features(sets.generated)?)?,
            is_score: inception_score(&probs)?,
            pitch_accuracy: pitch_accuracy(&probs, sets.generated_labels)?,
            pitch_entropy: pitch_entropy(&probs)?,
            n_train: sets.train.shape()[0],
            n_reference: sets.reference.shape()[0],
            n_generated: sets.generated.shape()[0],
            config: serde_json::to_value(opts).unwrap_or_default(),
        };
        Ok((report, cells))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>8} {:>10} {:>8} {:>8} {:>8}", "NDB", "FID", "IS", "PA", "PE")?;
        write!(
            f,
            "{:>8} {:>10.2} {:>8.3} {:>8.3} {:>8.3}",
            self.ndb, self.fid, self.is_score, self.pitch_accuracy, self.pitch_entropy
        )
    }
}
