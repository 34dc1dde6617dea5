use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("{what}: expected {expected} but got {actual}")]
    Shape {
        what: &'static str,
        expected: String,
        actual: String,
    },

    #[error("dimension mismatch: map has dim {map_dim}, embeddings have dim {set_dim}")]
    DimMismatch { map_dim: usize, set_dim: usize },

    #[error("language tag must be non-empty")]
    EmptyLanguage,

    #[error("split exceeds population: test {test} + val {val} must be < n = {n}")]
    SplitExceedsPopulation { test: usize, val: usize, n: usize },

    #[error("empty embedding set")]
    EmptySet,

    #[error("empty training set")]
    EmptyTraining,

    #[error("empty validation set")]
    EmptyValidation,

    #[error("too few training pairs: need at least {needed}, got {got}")]
    TooFewPairs { needed: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate dD denominator: d = {d:e}, mapped d = {d_mapped:e}")]
    DegenerateDenominator { d: f64, d_mapped: f64 },

    #[error("zero-norm vector in {set} at row {row}")]
    ZeroNorm { set: &'static str, row: usize },

    #[error("zero-norm column {col} in map matrix")]
    ZeroColumn { col: usize },

    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Failures while decoding the on-disk formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("size mismatch: header declares {declared} bytes but file holds {actual}")]
    SizeMismatch { declared: u64, actual: u64 },

    #[error("invalid UTF-8 in {0}")]
    InvalidUtf8(&'static str),

    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),

    #[error("line {line}: expected 2 fields")]
    MalformedLine { line: usize },

    #[error("invalid header field: {0}")]
    InvalidHeader(String),
}
