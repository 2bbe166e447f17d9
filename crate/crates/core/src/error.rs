use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("document could not be decoded as {encoding}")]
    Decode { encoding: &'static str },

    #[error("page `{0}` contains no text blocks")]
    EmptyPage(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(String),

    #[error("split counts {requested} do not match corpus size {available}")]
    SplitMismatch { requested: usize, available: usize },

    #[error("malformed vocabulary file (line {line}): {reason}")]
    VocabularyFormat { line: usize, reason: String },

    #[error("malformed split manifest (line {line}): {reason}")]
    ManifestFormat { line: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sequence is empty")]
    EmptySequence,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("not a parameter file (bad magic bytes)")]
    BadMagic,

    #[error("unsupported parameter format version {found} (expected {expected})")]
    Version { found: u8, expected: u8 },

    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("parameter file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("evaluation set is empty")]
    EmptyEvaluation,

    #[error("threshold {0} is outside (0, 1)")]
    Threshold(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

impl Error {
    /// True for failures of the arithmetic itself (NaN, divergence) as
    /// opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::Divergence { .. })
    }
}
