use thiserror::Error;

/// Errors raised across the library.
///
/// Each variant maps onto a process exit code through [`Error::exit_code`],
/// which the CLI uses verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An inner product or probability fell outside its admissible range.
    #[error("admissibility violated: {what} = {value} is out of range")]
    Admissibility { what: String, value: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Rank-deficient or ill-conditioned input to an alignment.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The estimated sparsity is not positive, so rescaling is undefined.
    #[error("rescale invalid: estimated sparsity {0} is not positive")]
    RescaleInvalid(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Parse(_) | Error::Json(_) => 2,
            Error::Admissibility { .. } => 3,
            Error::Numeric(_) | Error::Degenerate(_) | Error::RescaleInvalid(_) => 4,
            Error::Io(_) => 1,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
