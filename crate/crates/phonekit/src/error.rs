//! Toolkit-wide error type.

use std::path::PathBuf;

/// Errors produced by corpus I/O, feature extraction, model training and
/// decoding. Variants are grouped so callers (the CLI in particular) can
/// distinguish data problems from numeric failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header in {what}: {detail}")]
    MalformedHeader { what: &'static str, detail: String },

    #[error("unsupported encoding in {what}: {detail}")]
    UnsupportedEncoding { what: &'static str, detail: String },

    #[error("empty payload in {what}")]
    EmptyPayload { what: &'static str },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("parse error in {path} line {line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("shape mismatch in {what}: expected {expected}, got {actual}")]
    ShapeMismatch {
        what: String,
        expected: String,
        actual: String,
    },

    #[error("sample rate mismatch: {a} Hz vs {b} Hz")]
    SampleRateMismatch { a: u32, b: u32 },

    #[error("word not in lexicon: {0}")]
    OutOfVocabulary(String),

    #[error("phone not in inventory: {0}")]
    UnknownPhone(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("all channels rejected")]
    AllChannelsRejected,

    #[error("no filters with center frequency inside [{lo}, {hi}] Hz")]
    NoFiltersInBand { lo: f64, hi: f64 },

    #[error("data rank {rank} below requested {requested} components")]
    InsufficientRank { rank: usize, requested: usize },

    #[error("empty phone sequence where a non-empty one is required")]
    EmptySequence,

    #[error("no feasible path: {0}")]
    NoFeasiblePath(String),

    #[error("numeric failure in {what}: {detail}")]
    Numeric { what: &'static str, detail: String },

    #[error("missing prerequisite: {artifact} (run `{command}` first)")]
    MissingPrerequisite { artifact: String, command: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of numeric origin (underflow, divergence), as
    /// opposed to bad inputs. The CLI maps these to a distinct exit code.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric { .. } | Error::NonFinite(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
