use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pitch::check_pitch;
use super::synth::{synth_note, TimbreParams};
use super::wav::{read_wav, write_wav};
use crate::error::{Error, Result};
use crate::spectral::Waveform;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteRecord {
    pub id: String,
    pub pitch: i64,
    /// Relative to the manifest's directory.
    pub waveform_path: String,
    pub timbre_seed: u64,
    pub note_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub sample_rate: u32,
    pub num_samples: usize,
    pub split_seed: u64,
    pub records: Vec<NoteRecord>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Parameters for a synthetic corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub pitches: Vec<i64>,
    pub n_per_pitch: usize,
    pub n_timbres: usize,
    pub seed: u64,
    pub num_samples: usize,
    pub sample_rate: u32,
}

impl CorpusSpec {
    pub fn new(pitches: Vec<i64>, n_per_pitch: usize, n_timbres: usize, seed: u64) -> Self {
        CorpusSpec {
            pitches,
            n_per_pitch,
            n_timbres,
            seed,
            num_samples: crate::spectral::NOTE_SAMPLES,
            sample_rate: crate::spectral::SAMPLE_RATE,
        }
    }

    pub fn with_length(mut self, num_samples: usize) -> Self {
        self.num_samples = num_samples;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.pitches.is_empty() || self.n_per_pitch == 0 || self.n_timbres == 0 {
            return Err(Error::Empty("corpus specification"));
        }
        self.pitches.iter().try_for_each(|&p| check_pitch(p))
    }

    /// Record list in generation order, without rendering audio.
    pub fn records(&self) -> Result<Vec<NoteRecord>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.pitches.len() * self.n_per_pitch);
        for &pitch in &self.pitches {
            for i in 0..self.n_per_pitch {
                let id = format!("p{pitch:03}_{i:03}");
                out.push(NoteRecord {
                    waveform_path: format!("audio/{id}.wav"),
                    id,
                    pitch,
                    timbre_seed: mix_seed(self.seed, 1, (i % self.n_timbres) as u64),
                    note_seed: mix_seed(self.seed, pitch as u64, i as u64),
                });
            }
        }
        Ok(out)
    }

    pub fn render(&self, record: &NoteRecord) -> Result<Waveform> {
        let timbre = TimbreParams::from_seed(record.timbre_seed);
        synth_note(record.pitch, &timbre, record.note_seed, self.num_samples, self.sample_rate)
    }

    /// Records and their audio, held in memory.
    pub fn synthesize(&self) -> Result<Vec<(NoteRecord, Waveform)>> {
        self.records()?
            .into_iter()
            .map(|r| {
                let w = self.render(&r)?;
                Ok((r, w))
            })
            .collect()
    }
}

/// SplitMix64-style seed derivation.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shuffled 80/20 train/test partition of ids.
pub fn split_ids(ids: &[String], seed: u64) -> (Vec<String>, Vec<String>) {
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ids.len() * 4 + 2) / 5;
    let test = shuffled.split_off(n_train);
    (shuffled, test)
}

impl DatasetManifest {
    pub fn from_records(records: Vec<NoteRecord>, spec: &CorpusSpec) -> Self {
        let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
        let (train_ids, test_ids) = split_ids(&ids, spec.seed);
        DatasetManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            sample_rate: spec.sample_rate,
            num_samples: spec.num_samples,
            split_seed: spec.seed,
            records,
            train_ids,
            test_ids,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::format(path, format!("unsupported schema version {}", m.schema_version)));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn record(&self, id: &str) -> Option<&NoteRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    fn select(&self, ids: &[String]) -> Vec<&NoteRecord> {
        ids.iter().filter_map(|id| self.record(id)).collect()
    }

    pub fn train_records(&self) -> Vec<&NoteRecord> {
        self.select(&self.train_ids)
    }

    pub fn test_records(&self) -> Vec<&NoteRecord> {
        self.select(&self.test_ids)
    }

    pub fn distinct_pitches(&self) -> Vec<i64> {
        let mut p: Vec<i64> = self.records.iter().map(|r| r.pitch).collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    pub fn load_waveform(&self, root: &Path, record: &NoteRecord) -> Result<Waveform> {
        read_wav(&root.join(&record.waveform_path))
    }
}

/// Render the corpus to `out_dir/audio/*.wav` and write `out_dir/manifest.json`.
pub fn make_dataset(spec: &CorpusSpec, out_dir: &Path) -> Result<DatasetManifest> {
    let records = spec.records()?;
    let audio = out_dir.join("audio");
    fs::create_dir_all(&audio).map_err(|e| Error::io(&audio, e))?;
    for r in &records {
        let w = spec.render(r)?;
        write_wav(&out_dir.join(&r.waveform_path), &w)?;
    }
    let manifest = DatasetManifest::from_records(records, spec);
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Directory a manifest's relative paths resolve against.
pub fn manifest_root(manifest_path: &Path) -> PathBuf {
    manifest_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::pitch::{MAX_PITCH, MIN_PITCH};

    #[test]
    fn full_pitch_range_split_sizes() {
        let spec = CorpusSpec::new((MIN_PITCH..=MAX_PITCH).collect(), 10, 4, 7);
        let recs = spec.records().unwrap();
        assert_eq!(recs.len(), 610);
        let m = DatasetManifest::from_records(recs, &spec);
        assert_eq!((m.train_ids.len(), m.test_ids.len()), (488, 122));
    }

    #[test]
    fn split_disjoint_exhaustive_and_deterministic() {
        let ids: Vec<String> = (0..37).map(|i| i.to_string()).collect();
        let (a, b) = split_ids(&ids, 5);
        let (a2, b2) = split_ids(&ids, 5);
        assert_eq!((&a, &b), (&a2, &b2));
        let mut all: Vec<String> = a.iter().chain(&b).cloned().collect();
        all.sort();
        let mut expected = ids.clone();
        expected.sort();
        assert_eq!(all, expected);
        assert!((a.len() as f64 - 0.8 * 37.0).abs() <= 1.0);
        let (c, _) = split_ids(&ids, 6);
        assert_ne!(a, c);
    }

    #[test]
    fn out_of_range_pitch_rejected() {
        let spec = CorpusSpec::new(vec![60, 90], 1, 1, 0);
        assert!(spec.records().is_err());
    }

    #[test]
    fn same_seed_same_manifest() {
        let spec = CorpusSpec::new(vec![48, 60], 3, 2, 9).with_length(512);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m1 = make_dataset(&spec, d1.path()).unwrap();
        let m2 = make_dataset(&spec, d2.path()).unwrap();
        assert_eq!(m1, m2);
        let loaded = DatasetManifest::load(&d1.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(loaded, m1);
        let r = &loaded.records[0];
        let w = loaded.load_waveform(d1.path(), r).unwrap();
        assert_eq!(w.len(), 512);
    }

    #[test]
    fn unwritable_dir_reports_path() {
        let spec = CorpusSpec::new(vec![48], 1, 1, 0).with_length(64);
        let e = make_dataset(&spec, Path::new("/proc/definitely/not/here")).unwrap_err();
        assert!(e.to_string().contains("/proc/definitely/not/here"));
    }
}
