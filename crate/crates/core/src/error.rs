use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type. Variants map one-to-one onto the failure modes
/// of the pipeline stages; the CLI prints them as single-line diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no input slices found in {0}")]
    MissingFiles(PathBuf),

    #[error("slice dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("data length mismatch: expected {expected} bytes, found {actual}")]
    LengthMismatch { expected: u64, actual: u64 },

    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),

    #[error("invalid intensity window: lo {lo} > hi {hi}")]
    InvalidWindow { lo: u16, hi: u16 },

    #[error("no seed artery found in slice 0")]
    SeedNotFound,

    #[error("empty histogram")]
    EmptyHistogram,

    #[error("empty series")]
    EmptySeries,

    #[error("volume carries no rescale metadata (physical units required)")]
    MissingRescale,

    #[error("count vectors differ in length: {auto} vs {reference}")]
    CountLengthMismatch { auto: usize, reference: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
