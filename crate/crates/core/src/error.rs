use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// One entry per violated field.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("innovation covariance is singular (R and P have both collapsed)")]
    SingularInnovation,

    #[error("matrix is not invertible: {0}")]
    SingularMatrix(&'static str),

    #[error("covariance is near-singular (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("uncertainty must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("degenerate alignment geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("report structures do not match: {0}")]
    StructureMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by the numbers rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularInnovation
                | Error::SingularMatrix(_)
                | Error::IllConditioned { .. }
                | Error::NonPositiveSigma(_)
                | Error::DegenerateGeometry(_)
        )
    }
}
