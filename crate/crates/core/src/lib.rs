//! Bounds on the rate-distortion region of the Gaussian CEO problem.
//!
//! A fusion center reconstructs a Gaussian source from rate-limited sensor
//! descriptions. This crate evaluates and minimizes inner and outer bounds
//! on the achievable rate region: subset-sum bounds, tangent-hyperplane
//! objectives, the scalar and parallel specializations where the region is
//! known exactly, general-channel forms, and the closed-form corollaries
//! behind two strict-separation counterexamples.
//!
//! Modules:
//! - [`matkernel`]: dense symmetric matrix kernel (eigendecomposition based);
//! - [`model`]: instance types and validation of the standing assumptions;
//! - [`bounds`]: pure bound evaluators;
//! - [`optimize`]: tangent-objective minimization and the grid oracle;
//! - [`verify`]: runnable end-to-end checks and the counterexample demos;
//! - [`random`]: seeded instance/allocation generators for the suites.

pub mod bounds;
pub mod error;
pub mod matkernel;
pub mod model;
pub mod optimize;
pub mod random;
pub mod verify;

pub use error::{Error, Result};
