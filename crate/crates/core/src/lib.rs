//! Spectral and dynamical reflection probabilities for whole-line Jacobi and CMV operators.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases at the bottom
//! fix `f64`, which is what the CLI and the acceptance suite use.

pub mod cli_harness;
pub mod cmv_core;
pub mod dynamics;
pub mod error;
pub mod lattice_models;
pub mod linalg;
pub mod mobius;
pub mod reflection_jacobi;
pub mod scalar;
pub mod weyl_jacobi;

pub use error::{Error, Result};
pub use lattice_models::{OperatorModel, Side};
pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;
pub type Jacobi = lattice_models::JacobiCoeffs<f64>;
pub type Cmv = lattice_models::VerblunskyCoeffs<f64>;
pub type Model = lattice_models::OperatorModel<f64>;
