//! hp-adaptive finite elements for elastoplasticity with linear kinematic hardening.

pub mod adaptivity;
pub mod assembly;
pub mod basis;
pub mod benchmark;
pub mod error;
pub mod estimator;
pub mod field;
pub mod linalg;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod tensor;

pub use error::{Error, Result};
