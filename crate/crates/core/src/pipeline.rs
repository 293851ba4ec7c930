//! Corpus → normalized spectral images, shared by the command line, tests and bindings.

use std::path::Path;

use crate::dataio::{manifest_root, pitch_index, DatasetManifest, NoteRecord};
use crate::error::{Error, Result};
use crate::gan::TrainingSet;
use crate::spectral::{fit_normalization, Codec, RepresentationConfig, SpectralImage, Waveform, NORM_FIT_EXAMPLES};
use crate::tensor::Tensor;

#[derive(Clone, Debug, Default)]
pub struct EncodedSplit {
    pub images: Vec<SpectralImage>,
    pub pitches: Vec<i64>,
    /// Pitch indices into the 61-way one-hot.
    pub labels: Vec<usize>,
}

impl EncodedSplit {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Images stacked as `[n, frames, bins, 2]`.
    pub fn tensor(&self) -> Result<Tensor<f32>> {
        images_tensor(&self.images)
    }

    pub fn training_set(&self) -> Result<TrainingSet> {
        TrainingSet::new(self.tensor()?, self.labels.clone())
    }
}

#[derive(Clone, Debug)]
pub struct EncodedDataset {
    /// Representation with normalization fitted on the training split.
    pub repr: RepresentationConfig,
    pub train: EncodedSplit,
    pub test: EncodedSplit,
}

pub fn images_tensor(images: &[SpectralImage]) -> Result<Tensor<f32>> {
    let first = images.first().ok_or(Error::Empty("image set"))?;
    let mut data = Vec::with_capacity(images.len() * first.data.len());
    for img in images {
        if img.shape() != first.shape() {
            return Err(Error::shape("images_tensor", format!("{:?} vs {:?}", img.shape(), first.shape())));
        }
        data.extend_from_slice(&img.data);
    }
    let [h, w, c] = first.shape();
    Tensor::new(&[images.len(), h, w, c], data)
}

/// Leading `num_samples` of a note; shorter notes are left for the codec to pad.
pub fn excerpt(mut w: Waveform, num_samples: usize) -> Waveform {
    w.samples.truncate(num_samples);
    w
}

fn load_split(m: &DatasetManifest, root: &Path, records: &[&NoteRecord], n: usize) -> Result<Vec<Waveform>> {
    records.iter().map(|r| Ok(excerpt(m.load_waveform(root, r)?, n))).collect()
}

/// Load a manifest, fit normalization on up to [`NORM_FIT_EXAMPLES`] training notes and
/// encode both splits. Notes longer than the representation are cut to its length.
pub fn encode_dataset(manifest_path: &Path, repr: &RepresentationConfig) -> Result<EncodedDataset> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_root(manifest_path);
    let train_records = manifest.train_records();
    let test_records = manifest.test_records();
    if train_records.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let train_waves = load_split(&manifest, &root, &train_records, repr.num_samples)?;
    let fit_on = &train_waves[..train_waves.len().min(NORM_FIT_EXAMPLES)];
    let repr = repr.clone().with_norm(fit_normalization(fit_on, repr)?);
    let codec = Codec::new(repr.clone())?;
    let encode_split = |records: &[&NoteRecord], waves: Vec<Waveform>| -> Result<EncodedSplit> {
        let mut out = EncodedSplit::default();
        for (r, w) in records.iter().zip(waves) {
            out.images.push(codec.encode(&w)?);
            out.pitches.push(r.pitch);
            out.labels.push(pitch_index(r.pitch)?);
        }
        Ok(out)
    };
    let train = encode_split(&train_records, train_waves)?;
    let test_waves = load_split(&manifest, &root, &test_records, repr.num_samples)?;
    let test = encode_split(&test_records, test_waves)?;
    Ok(EncodedDataset { repr, train, test })
}
