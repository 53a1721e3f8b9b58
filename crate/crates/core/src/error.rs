use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the library. CLI exit codes are derived from
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coefficient vector needs tables of size n_max >= {required}, but tables have n_max = {available}")]
    DimensionOverflow { required: usize, available: usize },

    #[error("basis degenerated at row {row}: pre-normalization norm {norm:e} is below {threshold:e}")]
    Degenerate { row: usize, norm: f64, threshold: f64 },

    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },

    #[error("frequency mismatch: expected omega = {expected}, got {actual}")]
    FrequencyMismatch { expected: f64, actual: f64 },

    #[error("basis mismatch: expansion refers to {expected}, basis is {actual}")]
    BasisMismatch { expected: String, actual: String },

    #[error("representation matrix is singular at column {0}")]
    Singular(usize),

    #[error("corrupted tables: {0}")]
    Corrupt(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// 2 for anything the caller supplied, 3 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}
