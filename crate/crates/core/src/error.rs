//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (min eigenvalue {min_eig:.3e}, tolerance {tol:.3e})")]
    NotPositiveDefinite { min_eig: f64, tol: f64 },

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveSemiDefinite { min_eig: f64 },

    #[error("matrix is not symmetric (max asymmetry {max_asym:.3e})")]
    NotSymmetric { max_asym: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("allocation matrix for sensor {sensor} is singular; the rate term is infinite")]
    SingularAllocation { sensor: usize },

    #[error("operation requires exactly {expected} sensors, instance has {got}")]
    WrongSensorCount { expected: usize, got: usize },

    #[error("closed-form assumptions do not hold: {0}")]
    AssumptionsViolated(String),

    #[error("per-component distortion equality violated by {violation:.3e} (component {component})")]
    ConstraintNotSaturated { component: usize, violation: f64 },

    #[error("no allocation satisfies the distortion and box constraints")]
    Infeasible,

    #[error("grid oracle supports at most {max} scalar degrees of freedom, instance has {got}")]
    TooManyDegreesOfFreedom { max: usize, got: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

pub type Result<T> = std::result::Result<T, Error>;
