//! Synthetic note corpus, WAV I/O, dataset manifests and pitch encoding.

mod manifest;
mod pitch;
mod synth;
mod wav;

pub use manifest::{
    make_dataset, manifest_root, mix_seed, split_ids, CorpusSpec, DatasetManifest, NoteRecord,
    MANIFEST_FILE, MANIFEST_SCHEMA_VERSION,
};
pub use pitch::{
    check_pitch, index_pitch, midi_to_hz, one_hot_pitch, pitch_index, MAX_PITCH, MIN_PITCH, NUM_PITCHES,
};
pub use synth::{sine_wave, synth_note, TimbreParams, BAND_LIMIT, NOTE_PEAK};
pub use wav::{read_wav, write_wav};
