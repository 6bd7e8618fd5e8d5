use thiserror::Error;

/// Errors raised by estimators, generators and configuration parsing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("newton iteration did not converge after {iterations} iterations (last beta {last_beta:?})")]
    NonConvergence { iterations: usize, last_beta: Vec<f64> },

    #[error("monotone likelihood: {0}")]
    Separation(String),

    #[error("coefficient `{0}` is not identified")]
    NotIdentified(String),

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("negative hazard {hazard} at t={t}, z={z}")]
    NegativeHazard { t: f64, z: f64, hazard: f64 },

    #[error("invalid input at row {row}, column `{column}`: {message}")]
    Schema { row: usize, column: String, message: String },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
