use thiserror::Error;

/// Errors raised by the lattice engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("site ({col}, {row}) is out of range")]
    SiteOutOfRange { col: usize, row: usize },
    #[error("enumeration too large: {what} = {count} exceeds the limit {limit}")]
    EnumerationTooLarge {
        what: &'static str,
        count: usize,
        limit: usize,
    },
    #[error("unsupported boundary: {0}")]
    UnsupportedBoundary(String),
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("degenerate spectrum: {0}")]
    Degenerate(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
