//! Covariance kernel families and their discretization on grids.

use nalgebra::DMatrix;
use rand::Rng;

use super::grid::{checked_power, Grid};
use super::matrix::{max_asymmetry, CovMatrix};
use crate::error::{CovError, Result};
use crate::rng::stream_rng;

/// Half-integer Matérn smoothness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaternSmoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternSmoothness {
    pub fn from_value(zeta: f64) -> Result<Self> {
        match zeta {
            z if z == 0.5 => Ok(Self::Half),
            z if z == 1.5 => Ok(Self::ThreeHalves),
            z if z == 2.5 => Ok(Self::FiveHalves),
            _ => Err(CovError::InvalidParameter(format!(
                "Matern smoothness must be 0.5, 1.5 or 2.5, got {zeta}"
            ))),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Half => 0.5,
            Self::ThreeHalves => 1.5,
            Self::FiveHalves => 2.5,
        }
    }

    /// Correlation at scaled distance `t = r / lengthscale`.
    pub fn profile(self, t: f64) -> f64 {
        match self {
            Self::Half => (-t).exp(),
            Self::ThreeHalves => {
                let s = 3f64.sqrt() * t;
                (1.0 + s) * (-s).exp()
            }
            Self::FiveHalves => {
                let s = 5f64.sqrt() * t;
                (1.0 + s + 5.0 * t * t / 3.0) * (-s).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    SquaredExponential {
        lengthscale: f64,
    },
    Matern {
        smoothness: MaternSmoothness,
        lengthscale: f64,
    },
    Periodic {
        lengthscale: f64,
        period: f64,
    },
    /// Base kernel evaluated at grid indices shuffled by a seeded permutation.
    Permuted {
        base: Box<KernelSpec>,
        seed: u64,
    },
    /// Lift of an `M x M` PSD matrix to a kernel constant on `M` equal cells.
    PiecewiseConstant {
        sigma: DMatrix<f64>,
    },
}

impl KernelSpec {
    pub fn squared_exponential(lengthscale: f64) -> Result<Self> {
        let k = Self::SquaredExponential { lengthscale };
        k.validate()?;
        Ok(k)
    }

    pub fn matern(zeta: f64, lengthscale: f64) -> Result<Self> {
        let k = Self::Matern {
            smoothness: MaternSmoothness::from_value(zeta)?,
            lengthscale,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn periodic(lengthscale: f64, period: f64) -> Result<Self> {
        let k = Self::Periodic {
            lengthscale,
            period,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn permuted(base: KernelSpec, seed: u64) -> Result<Self> {
        let k = Self::Permuted {
            base: Box::new(base),
            seed,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn piecewise_constant(sigma: DMatrix<f64>) -> Result<Self> {
        let k = Self::PiecewiseConstant { sigma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::SquaredExponential { lengthscale } | Self::Matern { lengthscale, .. } => {
                positive("lengthscale", *lengthscale)
            }
            Self::Periodic {
                lengthscale,
                period,
            } => {
                positive("lengthscale", *lengthscale)?;
                positive("period", *period)
            }
            Self::Permuted { base, .. } => {
                if matches!(**base, Self::Permuted { .. }) {
                    return Err(CovError::InvalidParameter("nested permutation".into()));
                }
                base.validate()
            }
            Self::PiecewiseConstant { sigma } => validate_cell_matrix(sigma),
        }
    }

    /// Characteristic lengthscale, when the family has one.
    pub fn lengthscale(&self) -> Option<f64> {
        match self {
            Self::SquaredExponential { lengthscale }
            | Self::Matern { lengthscale, .. }
            | Self::Periodic { lengthscale, .. } => Some(*lengthscale),
            Self::Permuted { base, .. } => base.lengthscale(),
            Self::PiecewiseConstant { .. } => None,
        }
    }

    /// Pointwise evaluation `k(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(CovError::DimensionMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
        match self {
            Self::Permuted { .. } => Err(CovError::NotPointwise(
                "permuted kernels are defined on grid indices only".into(),
            )),
            Self::PiecewiseConstant { sigma } => {
                let s = cells_per_axis(sigma.nrows(), x.len())?;
                let ci = cell_of_point(x, s);
                let cj = cell_of_point(y, s);
                Ok(sigma[(ci, cj)])
            }
            _ => Ok(self.stationary_value(x, y)),
        }
    }

    fn stationary_value(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        match self {
            Self::SquaredExponential { lengthscale } => {
                (-r2 / (2.0 * lengthscale * lengthscale)).exp()
            }
            Self::Matern {
                smoothness,
                lengthscale,
            } => smoothness.profile(r2.sqrt() / lengthscale),
            Self::Periodic {
                lengthscale,
                period,
            } => {
                let s = (std::f64::consts::PI * r2.sqrt() / period).sin();
                (-2.0 * s * s / (lengthscale * lengthscale)).exp()
            }
            _ => unreachable!("not a stationary kernel"),
        }
    }

    /// Kernel matrix on `grid`, paired with the grid weight.
    pub fn discretize(&self, grid: &Grid) -> Result<CovMatrix> {
        self.validate()?;
        let n = grid.len();
        let h = grid.cell_weight();
        let entries = match self {
            Self::Permuted { base, seed } => {
                let inner = base.discretize(grid)?;
                let perm = permutation(n, *seed);
                let b = inner.entries();
                DMatrix::from_fn(n, n, |i, j| b[(perm[i], perm[j])])
            }
            Self::PiecewiseConstant { sigma } => {
                let s = cells_per_axis(sigma.nrows(), grid.dim())?;
                let l = grid.points_per_axis();
                if l % s != 0 {
                    return Err(CovError::Misaligned {
                        points_per_axis: l,
                        cells_per_axis: s,
                    });
                }
                let block = l / s;
                let cells: Vec<usize> = (0..n)
                    .map(|i| {
                        grid.axis_indices(i)
                            .iter()
                            .fold(0, |acc, &k| acc * s + k / block)
                    })
                    .collect();
                DMatrix::from_fn(n, n, |i, j| sigma[(cells[i], cells[j])])
            }
            _ => {
                let mut m = DMatrix::zeros(n, n);
                for j in 0..n {
                    let y = grid.point(j);
                    for i in j..n {
                        let v = self.stationary_value(grid.point(i), y);
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
                m
            }
        };
        Ok(CovMatrix::from_parts(entries, h))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CovError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn validate_cell_matrix(sigma: &DMatrix<f64>) -> Result<()> {
    if !sigma.is_square() || sigma.nrows() == 0 {
        return Err(CovError::InvalidParameter(
            "cell matrix must be square and non-empty".into(),
        ));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(CovError::InvalidParameter(
            "cell matrix has non-finite entries".into(),
        ));
    }
    let scale = sigma.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let asym = max_asymmetry(sigma);
    if asym > 1e-12 * scale {
        return Err(CovError::NotSymmetric { asymmetry: asym });
    }
    let eig = nalgebra::SymmetricEigen::new(sigma.clone()).eigenvalues;
    let norm = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-10 * norm {
        return Err(CovError::NotPositiveSemidefinite { pivot: min });
    }
    Ok(())
}

/// Number of cells per axis `S` with `S^dim = cells`.
pub fn cells_per_axis(cells: usize, dim: usize) -> Result<usize> {
    let guess = (cells as f64).powf(1.0 / dim as f64).round() as usize;
    for s in guess.saturating_sub(1)..=guess + 1 {
        if s > 0 && checked_power(s, dim).ok() == Some(cells) {
            return Ok(s);
        }
    }
    Err(CovError::InvalidParameter(format!(
        "{cells} cells do not form a {dim}-dimensional tensor partition"
    )))
}

fn cell_of_point(x: &[f64], s: usize) -> usize {
    x.iter().fold(0, |acc, &c| {
        let k = ((c * s as f64).floor().max(0.0) as usize).min(s - 1);
        acc * s + k
    })
}

/// Fisher–Yates permutation of `0..n` driven by `seed`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, 0);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}
