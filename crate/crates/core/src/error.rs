use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid network config: {0}")]
    InvalidNetwork(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("need at least {required} samples, got {actual}")]
    TooFewSamples { required: usize, actual: usize },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("sample variance is zero")]
    ZeroVariance,

    #[error("invalid mixing measure: {0}")]
    InvalidMixture(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("cell {cell} (widths {widths}): {source}")]
    Cell {
        cell: usize,
        widths: String,
        source: Box<Error>,
    },

    #[error("non-finite statistic `{statistic}` in cell {cell}, repeat {repeat}")]
    NumericalFailure {
        statistic: String,
        cell: usize,
        repeat: usize,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the computation itself (as opposed to bad input
    /// or configuration).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. } | Error::ZeroVariance | Error::NumericalFailure { .. } => true,
            Error::Cell { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
