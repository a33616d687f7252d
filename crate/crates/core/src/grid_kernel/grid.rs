//! Uniform tensor-product grids on the unit cube.

use crate::error::{CovError, Result};

/// Endpoint-inclusive mesh with `points_per_axis` points on each of `dim` axes.
///
/// Points are stored row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    points_per_axis: usize,
    coords: Vec<f64>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Quadrature weight `L^{-d}`.
    pub fn cell_weight(&self) -> f64 {
        (self.points_per_axis as f64).powi(-(self.dim as i32))
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Per-axis integer indices of flat point `i`.
    pub fn axis_indices(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = i % self.points_per_axis;
            i /= self.points_per_axis;
        }
        idx
    }

    /// Coordinate of index `i` on a single axis.
    pub fn axis_coord(&self, i: usize) -> f64 {
        axis_coord(i, self.points_per_axis)
    }
}

fn axis_coord(i: usize, l: usize) -> f64 {
    if l == 1 {
        0.0
    } else {
        i as f64 / (l - 1) as f64
    }
}

/// Builds the `L^d` point grid with per-axis mesh `i/(L-1)`.
pub fn build_grid(points_per_axis: usize, dim: usize) -> Result<Grid> {
    if points_per_axis == 0 {
        return Err(CovError::InvalidParameter(
            "points_per_axis must be at least 1".into(),
        ));
    }
    if dim == 0 {
        return Err(CovError::InvalidParameter("dim must be at least 1".into()));
    }
    let n = checked_power(points_per_axis, dim)?;
    let total = n
        .checked_mul(dim)
        .ok_or_else(|| CovError::Overflow(format!("{points_per_axis}^{dim} coordinates")))?;
    let axis: Vec<f64> = (0..points_per_axis)
        .map(|i| axis_coord(i, points_per_axis))
        .collect();
    let mut coords = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for _ in 0..n {
        coords.extend(idx.iter().map(|&k| axis[k]));
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < points_per_axis {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(Grid {
        dim,
        points_per_axis,
        coords,
    })
}

pub(crate) fn checked_power(base: usize, exp: usize) -> Result<usize> {
    let exp32 = u32::try_from(exp).map_err(|_| CovError::Overflow(format!("{base}^{exp}")))?;
    base.checked_pow(exp32)
        .ok_or_else(|| CovError::Overflow(format!("{base}^{exp}")))
}
