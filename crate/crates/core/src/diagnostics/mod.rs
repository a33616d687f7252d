//! Norms, effective dimension, capacity constants, truncation pair and KL divergence.

mod nu;
mod quadrature;
mod report;
mod spectral;
mod tridiagonal;

pub use nu::{nu_tail, NuSequence, NuSource, RadialProfile};
pub use quadrature::{integrate, integrate_to_infinity};
pub use report::DiagnosticReport;
pub use spectral::{dense_spectral_norm, spectral_norm};

use nalgebra::DMatrix;

use crate::error::{CovError, Result};
use crate::grid_kernel::{CovMatrix, Grid};
use crate::sampling::{cholesky_psd, draw_paths, CholFactor};

/// Relative tolerance for norms reported by diagnostics.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorQuantities {
    pub trace_op: f64,
    pub op_norm: f64,
    pub r_eff: f64,
}

/// Trace, operator norm and effective dimension `Tr / ||.||` of the operator.
pub fn operator_quantities(c: &CovMatrix) -> Result<OperatorQuantities> {
    let norm = spectral_norm(c.entries(), NORM_TOL)?;
    if norm == 0.0 {
        return Err(CovError::ZeroOperator);
    }
    let trace = c.entries().trace();
    Ok(OperatorQuantities {
        trace_op: c.grid_h() * trace,
        op_norm: c.grid_h() * norm,
        r_eff: trace / norm,
    })
}

/// `||k||_q^q ||k||_inf^{1-q} / ||C||`; `q = 0` counts non-zero entries per row.
pub fn gamma1(c: &CovMatrix, q: f64) -> Result<f64> {
    let norm = spectral_norm(c.entries(), NORM_TOL)?;
    gamma1_with_norm(c, q, norm)
}

pub(crate) fn gamma1_with_norm(c: &CovMatrix, q: f64, matrix_norm: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(CovError::InvalidParameter(format!(
            "q must lie in [0, 1], got {q}"
        )));
    }
    if matrix_norm == 0.0 {
        return Err(CovError::ZeroOperator);
    }
    let n = c.n();
    let data = c.entries().as_slice();
    let mut sup = 0.0f64;
    let mut row_max = 0.0f64;
    for j in 0..n {
        let col = &data[j * n..(j + 1) * n];
        let s: f64 = if q == 0.0 {
            col.iter().filter(|v| **v != 0.0).count() as f64
        } else if q == 1.0 {
            col.iter().map(|v| v.abs()).sum()
        } else {
            col.iter().map(|v| v.abs().powf(q)).sum()
        };
        row_max = row_max.max(s);
        sup = col.iter().fold(sup, |m, v| m.max(v.abs()));
    }
    Ok(row_max * sup.powf(1.0 - q) / matrix_norm)
}

/// Monte Carlo estimate of `E[max_x u(x)] / sqrt(max_x k(x, x))` and its standard error.
pub fn gamma2(
    factor: &CholFactor,
    grid: &Grid,
    mc_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if mc_samples < 2 {
        return Err(CovError::InvalidParameter(
            "gamma2 needs at least 2 Monte Carlo samples".into(),
        ));
    }
    if factor.n() != grid.len() {
        return Err(CovError::DimensionMismatch {
            expected: grid.len(),
            actual: factor.n(),
        });
    }
    let max_diag = factor.diagonal().into_iter().fold(0.0f64, f64::max);
    if max_diag <= 0.0 {
        return Err(CovError::InvalidParameter(
            "factored matrix has zero diagonal".into(),
        ));
    }
    let paths = draw_paths(factor, mc_samples, seed)?;
    let maxima: Vec<f64> = paths
        .iter()
        .map(|p| p.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let (mean, se) = mean_and_standard_error(&maxima);
    let scale = max_diag.sqrt();
    Ok((mean / scale, se / scale))
}

pub(crate) fn mean_and_standard_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn validate_nd(n_samples: usize, dim: usize) -> Result<()> {
    if n_samples == 0 {
        return Err(CovError::InvalidParameter("N must be at least 1".into()));
    }
    if dim == 0 {
        return Err(CovError::InvalidParameter(
            "dimension must be at least 1".into(),
        ));
    }
    Ok(())
}

/// `sqrt(m^d / N)`.
pub fn sample_rate(m: usize, n_samples: usize, dim: usize) -> f64 {
    ((m as f64).powi(dim as i32) / n_samples as f64).sqrt()
}

/// Smallest `m` with `nu_m <= sqrt(m^d / N)`.
pub fn m_star(nu: &NuSequence, n_samples: usize, dim: usize) -> Result<usize> {
    validate_nd(n_samples, dim)?;
    let mut m = 1;
    loop {
        if nu.value(m)? <= sample_rate(m, n_samples, dim) {
            return Ok(m);
        }
        m += 1;
    }
}

/// `nu_{m*} v sqrt((m* - 1)^d / N)`.
pub fn eps_star(nu: &NuSequence, n_samples: usize, dim: usize) -> Result<f64> {
    let m = m_star(nu, n_samples, dim)?;
    Ok(nu.value(m)?.max(sample_rate(m - 1, n_samples, dim)))
}

/// `max_m min(nu_m, sqrt(m^d / N))` by direct enumeration over `m = 1..=max(N, m*)`.
pub fn eps_star_enumerated(nu: &NuSequence, n_samples: usize, dim: usize) -> Result<f64> {
    let upper = n_samples.max(m_star(nu, n_samples, dim)?);
    let mut best = 0.0f64;
    for m in 1..=upper {
        best = best.max(nu.value(m)?.min(sample_rate(m, n_samples, dim)));
    }
    Ok(best)
}

/// `||Chat - C|| / ||C||`.
pub fn rel_error(chat: &CovMatrix, c: &CovMatrix) -> Result<f64> {
    let norm = spectral_norm(c.entries(), NORM_TOL)?;
    rel_error_with_norm(chat, c, norm)
}

pub(crate) fn rel_error_with_norm(chat: &CovMatrix, c: &CovMatrix, c_norm: f64) -> Result<f64> {
    if c_norm == 0.0 {
        return Err(CovError::ZeroOperator);
    }
    let diff = chat.sub(c)?;
    Ok(spectral_norm(diff.entries(), NORM_TOL)? / c_norm)
}

/// `KL(N(0, s1) || N(0, s2))`.
pub fn kl_gaussian(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    if s1.shape() != s2.shape() || !s1.is_square() {
        return Err(CovError::DimensionMismatch {
            expected: s2.nrows(),
            actual: s1.nrows(),
        });
    }
    let n = s2.nrows();
    let f2 = cholesky_psd(s2, 0.0)
        .map_err(|_| CovError::Singular("second covariance is not positive definite".into()))?;
    let scale = s2.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if f2.min_pivot().powi(2) <= 1e-12 * scale {
        return Err(CovError::Singular(
            "second covariance is numerically singular".into(),
        ));
    }
    let logdet1 = match cholesky_psd(s1, 0.0) {
        Ok(f1) => f1.log_det(),
        Err(_) => return Ok(f64::INFINITY),
    };
    let x = f2.solve(s1)?;
    let kl = 0.5 * (x.trace() - n as f64 - logdet1 + f2.log_det());
    Ok(kl.max(0.0))
}

/// Optional parts of a [`DiagnosticReport`].
#[derive(Debug, Clone, Default)]
pub struct DiagnoseOptions {
    pub q: Vec<f64>,
    /// Monte Carlo draws and seed for Gamma2, factored with the given jitter budget.
    pub gamma2: Option<(usize, u64, f64)>,
    /// Tail sequence, sample size and dimension for the truncation pair.
    pub truncation: Option<(NuSequence, usize, usize)>,
}

/// Every diagnostic of `c` in one pass, sharing a single norm computation.
pub fn diagnose(c: &CovMatrix, grid: &Grid, opts: &DiagnoseOptions) -> Result<DiagnosticReport> {
    let norm = spectral_norm(c.entries(), NORM_TOL)?;
    if norm == 0.0 {
        return Err(CovError::ZeroOperator);
    }
    let trace = c.entries().trace();
    let gamma1 = opts
        .q
        .iter()
        .map(|&q| {
            if q <= 0.0 {
                return Err(CovError::InvalidParameter(format!(
                    "q must lie in (0, 1], got {q}"
                )));
            }
            Ok((q, gamma1_with_norm(c, q, norm)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let gamma2 = match opts.gamma2 {
        Some((mc, seed, jitter)) => {
            Some(gamma2(&cholesky_psd(c.entries(), jitter)?, grid, mc, seed)?)
        }
        None => None,
    };
    let (m_star, eps_star) = match &opts.truncation {
        Some((nu, n, d)) => (Some(m_star(nu, *n, *d)?), Some(eps_star(nu, *n, *d)?)),
        None => (None, None),
    };
    Ok(DiagnosticReport {
        trace_op: c.grid_h() * trace,
        op_norm: c.grid_h() * norm,
        r_eff: trace / norm,
        gamma1,
        gamma2,
        m_star,
        eps_star,
    })
}
