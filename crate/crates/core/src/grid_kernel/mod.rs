//! Grids, kernel families, discretization and taper weights.

mod grid;
mod kernel;
mod matrix;
mod taper;

pub use grid::{build_grid, Grid};
pub use kernel::{cells_per_axis, permutation, KernelSpec, MaternSmoothness};
pub use matrix::{max_abs, max_asymmetry, CovMatrix};
pub(crate) use taper::product_form as taper_product;
pub use taper::{taper_weight, taper_weight_sumform};

use nalgebra::DMatrix;

use crate::diagnostics::spectral_norm;
use crate::error::Result;

/// Returns `(h * ||discretized lift||, ||sigma|| / M)`, which agree on aligned grids.
pub fn lift_matrix_norm_check(sigma: &DMatrix<f64>, grid: &Grid) -> Result<(f64, f64)> {
    let kernel = KernelSpec::piecewise_constant(sigma.clone())?;
    let c = kernel.discretize(grid)?;
    let lifted = c.grid_h() * spectral_norm(c.entries(), 1e-13)?;
    let direct = spectral_norm(sigma, 1e-13)? / sigma.nrows() as f64;
    Ok((lifted, direct))
}
