//! Joint sufficient dimension reduction and structured Gaussian conditional
//! modeling through regularized log-determinant programs.
//!
//! The library estimates a joint precision matrix over a response vector Y and
//! a covariate vector X whose Y-conditional structure is constrained to one of
//! five variants: a latent factor model, a sparse graphical model, a
//! sparse-plus-low-rank graphical model, and covariate-screening versions of
//! the latter two. The estimated off-diagonal block yields a low-dimensional
//! sufficient projection of X for the regression of Y on X.
//!
//! Modules:
//! - [`model`]: joint precision containers, block algebra, likelihoods.
//! - [`prox`]: closed-form proximal operators used by the solver.
//! - [`solver`]: consensus ADMM over the five variants, KKT certification.
//! - [`synth`]: synthetic population construction and sampling.
//! - [`diagnostics`]: identifiability and recovery-condition machinery.
//! - [`harness`]: Monte Carlo experiment orchestration.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod model;
pub mod prox;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use model::{JointPrecision, RegConfig, StructuredParams, Variant};
pub use solver::{fit, FitResult, SolverOptions};
