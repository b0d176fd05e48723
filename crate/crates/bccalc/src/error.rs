//! Library error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalcError {
    #[error("non-invertible element: {0}")]
    NotInvertible(String),
    #[error("valid order exhausted: {0}")]
    OrderExhausted(String),
    #[error("Laurent dependence on integration parameter `{0}`")]
    LaurentIntegration(String),
    #[error("unknown variable or parameter `{0}`")]
    UnknownVariable(String),
    #[error("bundle mismatch: {0}")]
    BundleMismatch(String),
    #[error("degree pattern violation: {0}")]
    DegreePattern(String),
    #[error("metric is not Hermitian: {0}")]
    NotHermitian(String),
    #[error("metric is not positive at the basepoint: {0}")]
    NotPositive(String),
    #[error("flatness defect: {0}")]
    NotFlat(String),
    #[error("morphism is not closed: {0}")]
    NotClosed(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureDiverged(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("scenario invalid: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, CalcError>;
