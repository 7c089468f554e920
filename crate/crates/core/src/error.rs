use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("graph is not biregular: {0}")]
    NotBiregular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("index {index} out of bounds (len {len})")]
    OutOfBounds { index: usize, len: usize },

    #[error("nonzero value at ({row}, {col}) lies outside the chain pattern")]
    PatternViolation { row: usize, col: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported chain: {0}")]
    UnsupportedChain(String),

    #[error("invalid tiling configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error(
        "no Ramanujan sample after {attempts} attempts (best lambda2 {best_lambda2:.6}, bound {bound:.6})"
    )]
    Exhausted {
        attempts: usize,
        best_lambda2: f64,
        bound: f64,
    },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failures while decoding text or binary artifacts.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("bad magic: expected \"RBGP\"")]
    BadMagic,

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("unknown precision tag {0}")]
    UnknownPrecision(u8),

    #[error("precision mismatch: file holds {found}, caller requested {expected}")]
    PrecisionMismatch {
        found: &'static str,
        expected: &'static str,
    },

    #[error("stream truncated: need {needed} bytes at offset {offset}, have {available}")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    Checksum { stored: u64, computed: u64 },

    #[error("malformed stream: {0}")]
    Malformed(String),

    #[error("line {line}: {msg}")]
    Text { line: usize, msg: String },
}
