//! Threshold-region analysis of conditional (CML) and unconditional (UML)
//! maximum-likelihood direction-of-arrival estimators.
//!
//! The crate provides the sampled cost functions, their large-array
//! deterministic equivalents, the asymptotic Gaussian covariance of the cost
//! vector, resolution-probability and MSE prediction, and a Monte Carlo
//! harness to check predictions against simulation.

pub mod array_model;
pub mod asy_cov;
pub mod cli;
pub mod det_equiv;
pub mod error;
pub mod ml_costs;
pub mod montecarlo;
pub mod numerics;
pub mod resolution;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
pub type CMat = nalgebra::DMatrix<C64>;
pub type RMat = nalgebra::DMatrix<f64>;
