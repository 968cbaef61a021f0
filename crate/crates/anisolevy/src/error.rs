use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input `{field}`: {reason}")]
    Input { field: String, reason: String },
    #[error("numeric failure: {reason} (partial value {partial})")]
    Numeric { reason: String, partial: f64 },
    #[error("regime error: {0}")]
    Regime(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("unbounded search: {0}")]
    Unbounded(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("truncation error: {0}")]
    Truncation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn input(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Input {
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

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(field: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::input(field, "non-finite value"))
    }
}
