//! Joint recovery of a structured signal and a structured corruption from noisy
//! linear measurements `y = Φx⋆ + v⋆ + z`.
//!
//! Numerical kernels are generic over [`scalar::Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which the geometry and experiment layers use.

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod optim1d;
pub mod regularizer;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};

pub type Matrix = linalg::Matrix<f64>;
pub type Instance = model::ProblemInstance<f64>;
pub type SolveOutput = solver::SolverResult<f64>;
pub type Anchor = regularizer::SubdiffAnchor<f64>;
