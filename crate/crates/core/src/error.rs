use thiserror::Error;

use crate::modem::SchemeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operation is undefined for the no-transmission scheme")]
    NoTxScheme,

    #[error("bit sequence of length {len} is not a multiple of {bits_per_symbol} bits per symbol")]
    LengthError { len: usize, bits_per_symbol: usize },

    #[error("bit value {0} at index {1} is neither 0 nor 1")]
    InvalidBit(u8, usize),

    #[error("bits per symbol must be at least 1, got {0}")]
    InvalidOrder(usize),

    #[error("bit rate must be positive, got {0}")]
    InvalidRate(f64),

    #[error("symbol period must be positive, got {0}")]
    InvalidPeriod(f64),

    #[error("invalid bit count {bits} for {scheme}: {reason}")]
    InvalidLength {
        scheme: SchemeId,
        bits: u64,
        reason: &'static str,
    },

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("no scheme chosen for support point {0}")]
    IncompleteChoice(usize),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("unknown scheme name `{0}`")]
    UnknownScheme(String),

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
