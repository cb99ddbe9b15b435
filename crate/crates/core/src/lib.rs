//! Random perturbations of slender elastic rods: cross-section analysis, a 1D
//! surrogate with random coefficients, its homogenized proxy, a 3D reference
//! solver on the fixed domain and Monte Carlo drivers.

pub mod cli;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod homog;
pub mod linalg;
pub mod mc;
pub mod rod1d;
pub mod rod3d;
pub mod stats;

pub use error::{Error, Result};
