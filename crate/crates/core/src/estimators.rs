//! Sample covariance, tapering and thresholding estimators with their tuning rules.

use log::{debug, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::diagnostics::{m_star, spectral_norm, NuSequence, NORM_TOL};
use crate::error::{CovError, Result};
use crate::grid_kernel::{taper_product, CovMatrix, Grid};
use crate::linalg::axpy;
use crate::sampling::SampleSet;

/// How `||k||_inf` is resolved in the adaptive threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KInfMode {
    Known(f64),
    PluginMaxDiag,
    PluginMaxAbs,
}

/// Length scale multiplying `m*` in the taper radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaScaleMode {
    Lengthscale(f64),
    /// `r(Chat)^{-1/d}` from the sample covariance.
    PluginEffectiveDim,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub c0: f64,
    pub k_inf_mode: KInfMode,
    pub kappa_scale_mode: KappaScaleMode,
}

impl EstimatorConfig {
    pub fn with_lengthscale(lengthscale: f64) -> Self {
        Self {
            kappa_scale_mode: KappaScaleMode::Lengthscale(lengthscale),
            ..Self::default()
        }
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            c0: 2.0,
            k_inf_mode: KInfMode::PluginMaxDiag,
            kappa_scale_mode: KappaScaleMode::PluginEffectiveDim,
        }
    }
}

/// Uncentered second-moment matrix `(1/N) sum_n u_n u_n^T`.
pub fn sample_cov(samples: &SampleSet, grid_h: f64) -> Result<CovMatrix> {
    let n = samples.n_points();
    let count = samples.n_paths() as f64;
    let mut lower = vec![0.0; n * n];
    lower.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for p in samples.iter() {
            axpy(p[i], &p[..=i], &mut row[..=i]);
        }
        for v in &mut row[..=i] {
            *v /= count;
        }
    });
    for i in 0..n {
        for j in 0..i {
            lower[j * n + i] = lower[i * n + j];
        }
    }
    CovMatrix::new(DMatrix::from_vec(n, n, lower), grid_h)
}

/// Entrywise product of `chat` with the taper of radius `kappa`.
pub fn taper_estimate(chat: &CovMatrix, kappa: f64, grid: &Grid) -> Result<CovMatrix> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(CovError::InvalidParameter(format!(
            "taper radius must be positive, got {kappa}"
        )));
    }
    let n = chat.n();
    if n != grid.len() {
        return Err(CovError::DimensionMismatch {
            expected: grid.len(),
            actual: n,
        });
    }
    let src = chat.entries().as_slice();
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        let y = grid.point(j);
        for (i, v) in col.iter_mut().enumerate() {
            let w = taper_product(grid.point(i), y, kappa);
            *v = if w == 0.0 { 0.0 } else { src[j * n + i] * w };
        }
    });
    Ok(CovMatrix::from_parts(
        DMatrix::from_vec(n, n, out),
        chat.grid_h(),
    ))
}

/// Hard thresholding: keeps entries with `|c_ij| >= rho`.
pub fn threshold_estimate(chat: &CovMatrix, rho: f64) -> Result<CovMatrix> {
    if !(rho >= 0.0) {
        return Err(CovError::InvalidParameter(format!(
            "threshold must be non-negative, got {rho}"
        )));
    }
    let entries = chat.entries().map(|v| if v.abs() >= rho { v } else { 0.0 });
    Ok(CovMatrix::from_parts(entries, chat.grid_h()))
}

/// `kappa = m*(nu, N, d) * scale`.
pub fn choose_kappa(nu: &NuSequence, n_samples: usize, dim: usize, scale: f64) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CovError::InvalidParameter(format!(
            "kappa scale must be positive, got {scale}"
        )));
    }
    Ok(m_star(nu, n_samples, dim)? as f64 * scale)
}

/// Scale used by `choose_kappa` under `mode`.
pub fn kappa_scale(mode: KappaScaleMode, chat: &CovMatrix, dim: usize) -> Result<f64> {
    match mode {
        KappaScaleMode::Lengthscale(l) => Ok(l),
        KappaScaleMode::PluginEffectiveDim => {
            let norm = spectral_norm(chat.entries(), NORM_TOL)?;
            if norm == 0.0 {
                return Err(CovError::ZeroOperator);
            }
            let r_hat = chat.entries().trace() / norm;
            Ok(r_hat.powf(-1.0 / dim as f64))
        }
    }
}

/// `rho = c0 sqrt(k_inf) / sqrt(N) * mean_n max_x u_n(x)`, floored at 0.
pub fn adaptive_threshold(samples: &SampleSet, cfg: &EstimatorConfig) -> Result<f64> {
    if !(cfg.c0 > 0.0 && cfg.c0.is_finite()) {
        return Err(CovError::InvalidParameter(format!(
            "c0 must be positive, got {}",
            cfg.c0
        )));
    }
    let count = samples.n_paths();
    if cfg.c0 > (count as f64).sqrt() {
        warn!(
            "c0 = {} exceeds sqrt(N) = {:.4}",
            cfg.c0,
            (count as f64).sqrt()
        );
    }
    let k_inf = match cfg.k_inf_mode {
        KInfMode::Known(v) => v,
        KInfMode::PluginMaxDiag => {
            let n = samples.n_points();
            let mut diag = vec![0.0; n];
            for p in samples.iter() {
                for (d, v) in diag.iter_mut().zip(p) {
                    *d += v * v;
                }
            }
            diag.iter().map(|d| d / count as f64).fold(0.0, f64::max)
        }
        KInfMode::PluginMaxAbs => crate::grid_kernel::max_abs(sample_cov(samples, 1.0)?.entries()),
    };
    if !(k_inf >= 0.0) {
        return Err(CovError::InvalidParameter(format!(
            "resolved k_inf must be non-negative, got {k_inf}"
        )));
    }
    let mean_sup = samples
        .iter()
        .map(|p| p.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / count as f64;
    let rho = cfg.c0 * k_inf.sqrt() / (count as f64).sqrt() * mean_sup;
    if rho < 0.0 {
        debug!("mean path supremum {mean_sup} is negative; threshold clamped to 0");
    }
    Ok(rho.max(0.0))
}
