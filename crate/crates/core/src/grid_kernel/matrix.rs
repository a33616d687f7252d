use nalgebra::DMatrix;

use crate::error::{CovError, Result};

/// Symmetric discretized covariance together with its grid weight `h`.
///
/// The operator it represents acts as `f -> h * entries * f`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    entries: DMatrix<f64>,
    grid_h: f64,
}

impl CovMatrix {
    /// Wraps a square, exactly symmetric, finite matrix.
    pub fn new(entries: DMatrix<f64>, grid_h: f64) -> Result<Self> {
        if !entries.is_square() {
            return Err(CovError::DimensionMismatch {
                expected: entries.nrows(),
                actual: entries.ncols(),
            });
        }
        if !(grid_h > 0.0 && grid_h.is_finite()) {
            return Err(CovError::InvalidParameter(format!(
                "grid weight must be positive, got {grid_h}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(CovError::InvalidParameter(
                "matrix has non-finite entries".into(),
            ));
        }
        let asym = max_asymmetry(&entries);
        if asym > 0.0 {
            return Err(CovError::NotSymmetric { asymmetry: asym });
        }
        Ok(Self { entries, grid_h })
    }

    pub(crate) fn from_parts(entries: DMatrix<f64>, grid_h: f64) -> Self {
        debug_assert!(entries.is_square());
        Self { entries, grid_h }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn grid_h(&self) -> f64 {
        self.grid_h
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Entrywise difference `self - other`; grid weights must agree.
    pub fn sub(&self, other: &CovMatrix) -> Result<CovMatrix> {
        if self.n() != other.n() {
            return Err(CovError::DimensionMismatch {
                expected: self.n(),
                actual: other.n(),
            });
        }
        Ok(CovMatrix::from_parts(
            &self.entries - &other.entries,
            self.grid_h,
        ))
    }

    pub fn scaled(&self, factor: f64) -> CovMatrix {
        CovMatrix::from_parts(&self.entries * factor, self.grid_h)
    }
}

/// Largest `|a_ij - a_ji|`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
