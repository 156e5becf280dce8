//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian: {0}")]
    NonHermitian(String),

    #[error("matrix is singular or ill-conditioned: {0}")]
    Singular(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pole at evaluated frequency: {0}")]
    PoleAtFrequency(String),

    #[error("factorization failed at frequency {omega_rad_s} rad/s: {detail}")]
    Factorization { omega_rad_s: f64, detail: String },

    #[error("SDP solve failed: {0}")]
    Solver(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("no finite certificate exists with the supplied constraints: {0}")]
    CertificateUnbounded(String),

    #[error("identification failed: {0}")]
    Identification(String),

    #[error("configuration error at `{field}`: {detail}")]
    Config { field: String, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
