use thiserror::Error;

use crate::operator::Role;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("operator dimension must be positive")]
    EmptyDimension,

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, scale {scale:e})")]
    NotSymmetric { asymmetry: f64, scale: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotSpd(String),

    #[error("operator role mismatch: expected {expected:?}, got {got:?}")]
    RoleMismatch { expected: Role, got: Role },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("direction u is zero; the update is undefined along it")]
    ZeroDirection,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("internal numerical error: {0}")]
    Numerical(String),

    #[error("iterate diverged at k = {k}")]
    Divergence { k: usize },

    #[error("integral Hessian quadrature error {est_error:e} exceeds threshold {threshold:e} at k = {k}")]
    Quadrature {
        k: usize,
        est_error: f64,
        threshold: f64,
    },

    #[error("trace has no operator snapshots (record_operators was off)")]
    MissingSnapshots,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
