//! Estimation of covariance operators from discretized Gaussian process samples.
//!
//! The crate is organised bottom-up: [`grid_kernel`] builds grids and kernel
//! matrices, [`sampling`] factors them and draws paths, [`estimators`] implements
//! the sample, tapered and thresholded covariance estimators, [`diagnostics`]
//! computes norms and capacity constants, [`minimax_testbed`] builds the
//! lower-bound families, and [`experiments`] runs the relative-error sweeps.

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod grid_kernel;
pub mod io;
mod linalg;
pub mod minimax_testbed;
pub mod rng;
pub mod sampling;

pub use error::{CovError, Result};
