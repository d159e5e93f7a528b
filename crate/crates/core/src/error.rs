use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("eigendecomposition of {rows}x{cols} matrix did not converge within {iterations} iterations")]
    Convergence {
        rows: usize,
        cols: usize,
        iterations: usize,
    },

    #[error("function not finite when probing parameter {index}")]
    Evaluation { index: usize },

    #[error("segment {segment}: {source}")]
    Segment {
        segment: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {kind}")]
    Parse { path: PathBuf, kind: ParseError },

    #[error("training diverged (non-finite loss) at {stage} {index}")]
    Diverged { stage: &'static str, index: usize },

    #[error("sweep at n={n}: {source}")]
    Sweep {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("plot: {0}")]
    Plot(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Binary-format failures. Offsets are byte positions in the file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("bad magic {found:02x?}, expected {expected:02x?}")]
    BadMagic { expected: Vec<u8>, found: Vec<u8> },

    #[error("truncated: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("{extra} trailing bytes after offset {offset}")]
    TrailingBytes { offset: u64, extra: u64 },

    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("bad header field {field} = {value} at offset {offset}")]
    BadHeader {
        field: &'static str,
        value: u64,
        offset: u64,
    },

    #[error("token id {id} >= vocabulary size {vocab} at offset {offset}")]
    TokenOutOfRange { id: u32, vocab: u32, offset: u64 },

    #[error("label {label} out of range at offset {offset}")]
    BadLabel { label: u32, offset: u64 },

    #[error("non-finite embedding value at offset {offset}")]
    NonFinite { offset: u64 },

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, kind: ParseError) -> Self {
        Error::Parse {
            path: path.into(),
            kind,
        }
    }

    pub(crate) fn in_segment(self, segment: usize) -> Self {
        Error::Segment {
            segment,
            source: Box::new(self),
        }
    }
}
