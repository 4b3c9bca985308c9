use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("coupled-mode system is singular at drive frequency {drive_freq:e} s^-1 (lossless resonance)")]
    SingularSystem { drive_freq: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infinite lifetime: eigenvalue {0} is purely real")]
    InfiniteLifetime(&'static str),

    #[error("no coincidence peak: {0}")]
    NoPeak(String),

    #[error("accidental window holds zero counts")]
    ZeroAccidentals,

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. }
                | Error::NonConvergence { .. }
                | Error::NoPeak(_)
                | Error::ZeroAccidentals
                | Error::InsufficientStatistics(_)
                | Error::DegenerateFit(_)
                | Error::Domain(_)
                | Error::InfiniteLifetime(_)
                | Error::DivisionByZero(_)
        )
    }
}
