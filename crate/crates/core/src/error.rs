use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid array geometry: {0}")]
    Geometry(String),

    #[error("angle {angle}° lies outside the array sector [{lo}°, {hi}°]")]
    OutsideSector { angle: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("recording has {len} samples, shorter than one window of {window}")]
    TooShort { len: usize, window: usize },

    #[error("frequency band [{lo}, {hi}] Hz selects no bins")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
