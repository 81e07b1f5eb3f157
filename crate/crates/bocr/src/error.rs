//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands have incompatible shapes. This signals a wiring bug in the
    /// caller, not bad data.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An argument outside the operation's domain (zero sizes, empty sets,
    /// out-of-range indices).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The target label sequence cannot be aligned to the available frames.
    #[error("infeasible target: {frames} frames cannot carry a target needing {min_frames}")]
    InfeasibleTarget { frames: usize, min_frames: usize },

    /// A malformed alphabet manifest (bad escape, duplicate symbol, wrong count).
    #[error("alphabet manifest: {0}")]
    Manifest(String),

    /// Text contains a codepoint the alphabet does not cover.
    #[error("unsupported symbol U+{codepoint:04X} at character offset {offset}")]
    UnsupportedSymbol { codepoint: u32, offset: usize },

    /// Image decoding or shape problems (wrong color model, bad PGM header).
    #[error("image: {0}")]
    Image(String),

    /// Model file does not start with the expected magic.
    #[error("model file format: {0}")]
    ModelFormat(String),

    /// Model file written by an unsupported format version.
    #[error("model file version {found} not supported (this build reads versions 1..={supported})")]
    ModelVersion { found: u32, supported: u32 },

    /// Model file failed its checksum or length checks.
    #[error("model file corrupted: {0}")]
    ModelCorrupted(String),

    /// Accuracy metrics are undefined (no reference characters or words).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Glyph atlas generation could not satisfy its constraints.
    #[error("glyph generation: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
