use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed row at line {0}")]
    MalformedRow(usize),
    #[error("invalid UTF-8 at line {0}")]
    EncodingError(usize),
    #[error("invalid sentence: {0}")]
    InvalidSentence(String),
    #[error("invalid pair: {0}")]
    InvalidPair(String),
    #[error("pair {0} has no alignment score")]
    MissingScore(usize),
    #[error("requested {requested} pairs from a corpus of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no non-empty sentence to learn from")]
    EmptyCorpus,
    #[error("embedding file length {len} bytes is not a multiple of {row} bytes")]
    BadLength { len: usize, row: usize },
    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("index is empty")]
    EmptyIndex,
    #[error("margin denominator {0} is degenerate")]
    DivisionDegenerate(f64),
    #[error("cannot hold out {dev} pairs out of {total}")]
    TooFewPairs { dev: usize, total: usize },
    #[error("sequence of {len} tokens exceeds the maximum of {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("non-finite loss at update {update}: {detail}")]
    NonFiniteLoss { update: usize, detail: String },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty hypothesis set")]
    EmptyHypSet,
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that stem from numerical divergence rather than bad data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteLoss { .. } | Error::DivisionDegenerate(_) | Error::NonFiniteValue(_)
        )
    }
}
