//! PSD factorization with jitter escalation and reproducible Gaussian path draws.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{CovError, Result};
use crate::linalg::dot;
use crate::rng::stream_rng;

/// Lower-triangular factor `L` with `L L^T = C + jitter * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholFactor {
    n: usize,
    lower: Vec<f64>,
    jitter: f64,
}

impl CholFactor {
    /// Wraps an explicit lower-triangular matrix; the strict upper part is ignored.
    pub fn from_lower(lower: &DMatrix<f64>) -> Result<Self> {
        if !lower.is_square() {
            return Err(CovError::DimensionMismatch {
                expected: lower.nrows(),
                actual: lower.ncols(),
            });
        }
        let n = lower.nrows();
        let mut rows = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                rows[i * n + j] = lower[(i, j)];
            }
        }
        Ok(Self {
            n,
            lower: rows,
            jitter: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Row `i` of `L`, truncated at the diagonal.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.lower[i * self.n..i * self.n + i + 1]
    }

    pub fn lower_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if j <= i {
                self.lower[i * self.n + j]
            } else {
                0.0
            }
        })
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Diagonal of `L L^T`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), self.row(i))).collect()
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n)
            .map(|i| 2.0 * self.lower[i * self.n + i].ln())
            .sum()
    }

    pub fn min_pivot(&self) -> f64 {
        (0..self.n)
            .map(|i| self.lower[i * self.n + i])
            .fold(f64::INFINITY, f64::min)
    }

    /// Solves `L L^T X = B` column by column.
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.n {
            return Err(CovError::DimensionMismatch {
                expected: self.n,
                actual: b.nrows(),
            });
        }
        let n = self.n;
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            let v = col.as_mut_slice();
            for i in 0..n {
                let s = v[i] - dot(&self.lower[i * n..i * n + i], &v[..i]);
                v[i] = s / self.lower[i * n + i];
            }
            for i in (0..n).rev() {
                let mut s = v[i];
                for k in (i + 1)..n {
                    s -= self.lower[k * n + i] * v[k];
                }
                v[i] = s / self.lower[i * n + i];
            }
        }
        Ok(x)
    }
}

/// Cholesky factorization of a symmetric PSD matrix with diagonal shift escalation.
pub fn cholesky_psd(c: &DMatrix<f64>, jitter_budget: f64) -> Result<CholFactor> {
    if !c.is_square() {
        return Err(CovError::DimensionMismatch {
            expected: c.nrows(),
            actual: c.ncols(),
        });
    }
    if !(jitter_budget >= 0.0) {
        return Err(CovError::InvalidParameter(format!(
            "jitter budget must be non-negative, got {jitter_budget}"
        )));
    }
    let n = c.nrows();
    if n == 0 {
        return Ok(CholFactor {
            n,
            lower: Vec::new(),
            jitter: 0.0,
        });
    }
    let unit = c.trace() / n as f64;
    let mut worst = match factor_with_shift(c, 0.0) {
        Ok(lower) => {
            return Ok(CholFactor {
                n,
                lower,
                jitter: 0.0,
            })
        }
        Err(pivot) => pivot,
    };
    if unit > 0.0 {
        let mut rel = 1e-12;
        while rel <= jitter_budget * (1.0 + 1e-9) {
            let shift = rel * unit;
            match factor_with_shift(c, shift) {
                Ok(lower) => {
                    return Ok(CholFactor {
                        n,
                        lower,
                        jitter: shift,
                    })
                }
                Err(pivot) => worst = worst.min(pivot),
            }
            rel *= 10.0;
        }
    }
    Err(CovError::NotPositiveSemidefinite { pivot: worst })
}

/// Row-oriented factorization; returns the first non-positive pivot on failure.
fn factor_with_shift(c: &DMatrix<f64>, shift: f64) -> std::result::Result<Vec<f64>, f64> {
    let n = c.nrows();
    let a = c.as_slice();
    let mut lower = vec![0.0; n * n];
    for i in 0..n {
        let (done, rest) = lower.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        let col_i = &a[i * n..i * n + n];
        for j in 0..i {
            let row_j = &done[j * n..j * n + n];
            let s = col_i[j] - dot(&row_i[..j], &row_j[..j]);
            row_i[j] = s / row_j[j];
        }
        let pivot = col_i[i] + shift - dot(&row_i[..i], &row_i[..i]);
        if !(pivot > 0.0) {
            return Err(if pivot.is_nan() {
                f64::NEG_INFINITY
            } else {
                pivot
            });
        }
        row_i[i] = pivot.sqrt();
    }
    Ok(lower)
}

/// `N` sample paths on the grid, stored path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n_points: usize,
    paths: Vec<f64>,
}

impl SampleSet {
    pub fn from_paths(paths: &[Vec<f64>]) -> Result<Self> {
        let n_points = paths.first().map_or(0, Vec::len);
        if paths.is_empty() || n_points == 0 {
            return Err(CovError::InvalidParameter(
                "sample set needs at least one non-empty path".into(),
            ));
        }
        if let Some(p) = paths.iter().find(|p| p.len() != n_points) {
            return Err(CovError::DimensionMismatch {
                expected: n_points,
                actual: p.len(),
            });
        }
        Ok(Self {
            n_points,
            paths: paths.concat(),
        })
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len() / self.n_points
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn path(&self, k: usize) -> &[f64] {
        &self.paths[k * self.n_points..(k + 1) * self.n_points]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.paths.chunks_exact(self.n_points)
    }

    pub fn scaled(&self, factor: f64) -> SampleSet {
        SampleSet {
            n_points: self.n_points,
            paths: self.paths.iter().map(|v| v * factor).collect(),
        }
    }

    /// Paths re-indexed so that point `i` takes the value at `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<SampleSet> {
        if perm.len() != self.n_points {
            return Err(CovError::DimensionMismatch {
                expected: self.n_points,
                actual: perm.len(),
            });
        }
        let paths = self
            .iter()
            .flat_map(|p| perm.iter().map(move |&k| p[k]))
            .collect();
        Ok(SampleSet {
            n_points: self.n_points,
            paths,
        })
    }
}

/// Draws `N` paths `L z_k`, with `z_k` taken from substream `k` of `seed`.
pub fn draw_paths(factor: &CholFactor, n_paths: usize, seed: u64) -> Result<SampleSet> {
    if n_paths == 0 {
        return Err(CovError::InvalidParameter(
            "number of paths must be at least 1".into(),
        ));
    }
    let n = factor.n();
    if n == 0 {
        return Err(CovError::InvalidParameter("factor is empty".into()));
    }
    let paths: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            (0..n).map(|i| dot(factor.row(i), &z[..=i])).collect()
        })
        .collect();
    Ok(SampleSet {
        n_points: n,
        paths: paths.concat(),
    })
}
