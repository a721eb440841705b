use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// The variants mirror the failure classes the experiments need to tell
/// apart: a [`Error::Degeneracy`] or [`Error::Collision`] means the seeded
/// oracle happened to violate one of its "negligible probability"
/// assumptions and the caller should resample the seed, while
/// [`Error::Parameter`] and [`Error::Usage`] are caller mistakes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("oracle degeneracy: {0}")]
    Degeneracy(String),

    #[error("oracle collision: {0}")]
    Collision(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for the errors that disappear when the oracle seed is resampled.
    pub fn is_resampleable(&self) -> bool {
        matches!(self, Error::Degeneracy(_) | Error::Collision(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
