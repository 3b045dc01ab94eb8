//! Crate-wide error type.
//!
//! Every constructor and operation reports violations through a dedicated
//! variant so callers (and tests) can distinguish failure modes.

use thiserror::Error;

/// Errors produced by cube construction, file I/O, and the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A dimension that must be at least 1 was zero.
    #[error("empty dimension: {0} must be >= 1")]
    EmptyDimension(&'static str),

    /// Buffer length does not match the declared dimensions.
    #[error("data length {got} does not match declared dimensions ({expected} samples expected)")]
    LengthMismatch { expected: usize, got: usize },

    /// A sample was NaN or infinite.
    #[error("non-finite sample at flat index {0}")]
    NonFinite(usize),

    /// A value fell outside its documented range.
    #[error("value out of range: {0}")]
    OutOfRange(String),

    /// Two operands have incompatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Band index past the end of the stack.
    #[error("band index {band} out of range for {bands} bands")]
    BandOutOfRange { band: usize, bands: usize },

    /// File did not start with the expected container magic.
    #[error("malformed header: bad magic {0:?}")]
    BadMagic([u8; 4]),

    /// Unsupported container version.
    #[error("malformed header: unsupported version {0}")]
    BadVersion(u32),

    /// Header declares dimensions whose product overflows addressable memory.
    #[error("dimension overflow: {height} x {width} x {bands} does not fit in memory")]
    DimensionOverflow { height: u64, width: u64, bands: u64 },

    /// Payload byte count disagrees with the header dimensions.
    #[error("payload length mismatch: expected {expected} samples, file holds {got}")]
    PayloadLength { expected: usize, got: usize },

    /// Invalid solver or denoiser parameter.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Dense materialization refused: the instance exceeds the size guard.
    #[error("instance too large for dense materialization: {0}")]
    TooLarge(String),

    /// Configuration file problem, reported with the offending field path.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config {
            path: "<json>".into(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
