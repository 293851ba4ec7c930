use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{op}: shape mismatch {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("input too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("normalization statistics have not been fitted")]
    Unfitted,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("pitch {0} outside MIDI range 24..=84")]
    PitchOutOfRange(i64),

    #[error("zero-norm latent vector")]
    ZeroVector,

    #[error("probability rows are not on the simplex (row {row}, sum {sum})")]
    NotSimplex { row: usize, sum: f64 },

    #[error("training diverged at step {step}: {snapshot}")]
    Diverged { step: u64, snapshot: String },

    #[error("{0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format { path: path.into(), message: message.to_string() }
    }
}
