use thiserror::Error;

/// Errors raised by the covariance fusion and union routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is singular (smallest eigenvalue {min_eig:e})")]
    Singular { min_eig: f64 },

    #[error("matrix is ill-conditioned (condition number {condition:e} exceeds 1e12)")]
    Conditioning { condition: f64 },

    #[error("joint covariance is not positive semidefinite (smallest eigenvalue {min_eig:e})")]
    InconsistentJoint { min_eig: f64 },

    #[error("degenerate ellipsoid triple: b'A^-1 b - c = {level:e} must be positive")]
    DegenerateTriple { level: f64 },

    #[error("omega = {0} is an endpoint; use the limit check instead")]
    EndpointOmega(f64),

    #[error("no strictly feasible point found: {0}")]
    Infeasible(String),

    #[error("containment checks disagree: {0}")]
    CheckDisagreement(String),

    #[error("post-hoc check failed: {0}")]
    CheckFailed(String),
}

pub type Result<T> = std::result::Result<T, CovError>;
