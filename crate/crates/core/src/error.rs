use std::path::PathBuf;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// `1 + w z` (or `1 - c²` in the spherical chart) vanished at a site.
    #[error("pole at site {site}: |denominator| = {modulus:e}")]
    Pole { site: usize, modulus: f64 },

    #[error("noise factor does not reproduce its diffusion block (residual {residual:e})")]
    Factorization { residual: f64 },

    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("no live trajectory at t = 0")]
    EmptyEnsemble,

    #[error("no samples inside the window [{start}, {end}]")]
    EmptyWindow { start: f64, end: f64 },

    #[error("Hilbert space dimension {dimension} exceeds the limit {limit}")]
    DimensionLimit { dimension: usize, limit: usize },

    #[error("invalid input:\n{0}")]
    Invalid(ValidationReport),

    #[error("{0}")]
    Unsupported(String),

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
