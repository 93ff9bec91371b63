use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("integrand is not finite at x = {x} (value {value})")]
    Evaluation { x: f64, value: f64 },

    #[error("quadrature did not converge after {evaluations} evaluations (best estimate {best}, error {error})")]
    Convergence {
        best: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("certification impossible: hypothesis violated: {hypothesis}")]
    CertificationImpossible { hypothesis: String },

    #[error("criterion inapplicable: {0}")]
    Inapplicable(String),

    #[error("rejected: {0}")]
    Rejected(String),

    #[error("validation failed for certificate {certificate}")]
    ValidationFailed {
        certificate: String,
        report: Box<crate::oracle::ValidationReport>,
    },

    #[error("internal numerical error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
