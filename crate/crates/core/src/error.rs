use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("malformed WAV data: {0}")]
    MalformedHeader(String),

    #[error("sample value {value} at index {index} is outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f64 },

    #[error("I/O failure on {}: {source}", .path.display())]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("buffer too short: {samples} samples, need at least {needed}")]
    BufferTooShort { samples: usize, needed: usize },

    #[error("frame count mismatch: expected {expected}, got {actual}")]
    FrameMismatch { expected: usize, actual: usize },

    #[error("invalid analysis configuration: {0}")]
    InvalidConfig(String),

    #[error("feature configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("no voiced frames in {0} features")]
    NoVoicedFrames(&'static str),

    #[error("{0} input is silent (mean energy below threshold)")]
    SilentInput(&'static str),

    #[error("parameter out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("degenerate search grid: {0}")]
    DegenerateGrid(String),

    #[error("manifest schema violation: {0}")]
    SchemaViolation(String),

    #[error("duplicate pair id {0:?}")]
    DuplicateId(String),

    #[error("broken one-to-one pairing: {} appears in more than one pair", .0.display())]
    BrokenPairing(PathBuf),

    #[error("annotation header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch { expected: String, found: String },

    #[error("annotation row {row}: expected {expected} fields, found {found}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("annotation row {row}: {message}")]
    AnnotationInvalid { row: usize, message: String },

    #[error("JSON error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// True for errors that indicate a bug or broken internal contract rather
    /// than bad input data.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::InvariantViolation(_))
    }
}
