use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the recognition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}: line {line}: {msg}")]
    MalformedRow { file: String, line: usize, msg: String },

    #[error("empty channel: {0}")]
    EmptyChannel(String),

    #[error("{channel}: timestamps not strictly increasing at line {line}")]
    NonMonotonic { channel: String, line: usize },

    #[error("label intervals overlap or are unsorted at line {line}")]
    OverlappingLabels { line: usize },

    #[error("capacitance {value} pF at line {line} outside plausible band [300, 600]")]
    OutOfBand { line: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training set contains a single class")]
    SingleClass,

    #[error("NaN loss at batch {batch}")]
    NanLoss { batch: usize },

    #[error("unlabeled segment at index {0}")]
    Unlabeled(usize),

    #[error("model file: {0}")]
    ModelFormat(#[from] ModelFormatError),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelFormatError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    Version(u16),
    #[error("header mismatch: {0}")]
    Header(String),
    #[error("truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

impl Error {
    /// Wrap an error with the name of the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Stage name attached by [`Error::at_stage`], if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NonFinite(_) | Error::NanLoss { .. } => true,
            Error::Stage { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
