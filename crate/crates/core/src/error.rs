use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// Variants are grouped by how a caller should react: configuration problems
/// (bad scenario or plan documents), applicability problems (an operation was
/// asked of a mechanism or spec it does not support, or a precondition does
/// not hold), and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("overlap violated at t={t}: propensity {value:e} is below the floor {floor:e}")]
    Overlap { t: usize, value: f64, floor: f64 },

    #[error("explosive system: spectral radius {spectral_radius} >= 1")]
    Explosive { spectral_radius: f64 },

    #[error("weak denominator: |{denominator:e}| is below the relative floor (relative magnitude {relative:e})")]
    WeakDenominator { denominator: f64, relative: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    /// Broad category used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config { .. } | Error::Io(_) | Error::Csv(_) | Error::Json(_) => ErrorKind::Configuration,
            Error::NotApplicable(_) | Error::Precondition(_) | Error::Overlap { .. } => {
                ErrorKind::Applicability
            }
            Error::Explosive { .. } | Error::WeakDenominator { .. } | Error::Numerical(_) => {
                ErrorKind::Numerical
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Configuration,
    Applicability,
    Numerical,
}

pub type Result<T> = std::result::Result<T, Error>;
