use thiserror::Error;

/// Failures surfaced by the core pipeline.
///
/// Everything here is a caller error or a malformed artifact; numerical
/// soundness violations inside the library (NaN gradients, shape drift
/// between paired forward/backward calls) are bugs and panic via debug
/// assertions instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported wavelet `{0}` (expected `haar` or `db2`)")]
    UnsupportedWavelet(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid probability vector: {0}")]
    Probability(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
