use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row {row} in {path}: {reason}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("negative age {age} in row {row}")]
    NegativeAge { age: i64, row: usize },

    #[error("age {age} implies label {expected} but row {row} carries label {actual}")]
    LabelMismatch {
        age: u32,
        expected: u8,
        actual: u8,
        row: usize,
    },

    #[error("sample size {requested} exceeds dataset size {available}")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("stratified operation needs both classes but dataset contains only label {only}")]
    SingleClass { only: u8 },

    #[error("test fraction {0} is outside (0, 1)")]
    DegenerateFraction(f64),

    #[error("lexicon inputs are empty (no external terms and no corpora)")]
    EmptyLexiconInput,

    #[error("lexicon capacity must be >= 1")]
    ZeroCapacity,

    #[error("text tokenizes to zero tokens")]
    EmptyTokenization,

    #[error("embedding has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("encoder pair has mismatched configurations")]
    ConfigMismatch,

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NanLoss { epoch: usize, step: usize },

    #[error("batch is empty")]
    EmptyBatch,

    #[error("prediction/label lengths differ: {predictions} vs {labels}")]
    LengthMismatch { predictions: usize, labels: usize },

    #[error("no dataset registered for platform {0}")]
    MissingCorpus(String),

    #[error("pan13 may only be used as a target platform (set allow_pan13_source to override)")]
    Pan13AsSource,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint error for {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("unknown platform {0:?}")]
    UnknownPlatform(String),

    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 for validation problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MalformedRow { .. }
            | Error::EmptyDataset(_)
            | Error::NegativeAge { .. }
            | Error::LabelMismatch { .. }
            | Error::SampleTooLarge { .. }
            | Error::SingleClass { .. }
            | Error::DegenerateFraction(_)
            | Error::EmptyLexiconInput
            | Error::ZeroCapacity
            | Error::DimensionMismatch { .. }
            | Error::ConfigMismatch
            | Error::LengthMismatch { .. }
            | Error::MissingCorpus(_)
            | Error::Pan13AsSource
            | Error::InvalidConfig(_)
            | Error::UnknownPlatform(_)
            | Error::UnknownVariant(_) => 1,
            _ => 2,
        }
    }
}
