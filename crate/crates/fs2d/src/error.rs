use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("scan geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("bandwidth mismatch: {0} vs {1}")]
    BandwidthMismatch(usize, usize),

    #[error("bandwidth {bandwidth} exceeds the angular sampling of a {size}x{size} magnitude")]
    BandwidthTooHigh { bandwidth: usize, size: usize },

    #[error("no usable structure in the correlation profile")]
    NoStructure,

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("parse error at line {line}: {message}")]
    ParseLine { line: usize, message: String },

    #[error("registration failed for pair {pair_index}: {source}")]
    PairFailed {
        pair_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
