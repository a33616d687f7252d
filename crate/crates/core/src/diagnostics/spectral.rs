//! Spectral norm of symmetric matrices by Lanczos with full reorthogonalization.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::tridiagonal::tridiagonal_eigen;
use crate::error::{CovError, Result};
use crate::grid_kernel::{max_abs, max_asymmetry};
use crate::linalg::{axpy, dot};
use crate::rng::stream_rng;

const START_SEED: u64 = 0x4c41_4e43_5a4f_5321;
const DENSE_FALLBACK_LIMIT: usize = 256;
const PARALLEL_MATVEC_MIN: usize = 384;

/// Largest absolute eigenvalue of the symmetric matrix `a`, to relative accuracy `tol`.
pub fn spectral_norm(a: &DMatrix<f64>, tol: f64) -> Result<f64> {
    if !a.is_square() {
        return Err(CovError::DimensionMismatch {
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    if !(tol > 1e-14 && tol < 1e-2) {
        return Err(CovError::InvalidParameter(format!(
            "tolerance must lie in (1e-14, 1e-2), got {tol}"
        )));
    }
    let scale = max_abs(a);
    if !scale.is_finite() {
        return Err(CovError::InvalidParameter(
            "matrix has non-finite entries".into(),
        ));
    }
    let asym = max_asymmetry(a);
    if asym > 1e-12 * scale {
        return Err(CovError::NotSymmetric { asymmetry: asym });
    }
    let n = a.nrows();
    if n == 0 || scale == 0.0 {
        return Ok(0.0);
    }
    match lanczos(a, tol) {
        Some(v) => Ok(v),
        None if n <= DENSE_FALLBACK_LIMIT => Ok(dense_spectral_norm(a)),
        None => Err(CovError::NoConvergence(format!(
            "Lanczos on {n}x{n} matrix"
        ))),
    }
}

/// Dense symmetric eigensolver; used as fallback and as test oracle.
pub fn dense_spectral_norm(a: &DMatrix<f64>) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(a.clone()).eigenvalues;
    eig.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn matvec(a: &DMatrix<f64>, x: &[f64], y: &mut [f64]) {
    let n = a.nrows();
    let data = a.as_slice();
    if n >= PARALLEL_MATVEC_MIN {
        y.par_iter_mut()
            .enumerate()
            .for_each(|(j, yj)| *yj = dot(&data[j * n..(j + 1) * n], x));
    } else {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = dot(&data[j * n..(j + 1) * n], x);
        }
    }
}

const CHECK_EVERY_FROM: usize = 32;
const CHECK_STRIDE: usize = 8;

fn lanczos(a: &DMatrix<f64>, tol: f64) -> Option<f64> {
    let n = a.nrows();
    let mut rng = stream_rng(START_SEED, n as u64);
    let mut q: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v /= norm);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    for k in 0..n {
        matvec(a, &q, &mut w);
        let alpha = dot(&q, &w);
        axpy(-alpha, &q, &mut w);
        if let Some(prev) = basis.last() {
            axpy(-betas[k - 1], prev, &mut w);
        }
        for _ in 0..2 {
            for v in basis.iter().chain(std::iter::once(&q)) {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        let beta = dot(&w, &w).sqrt();
        alphas.push(alpha);

        let exhausted = beta == 0.0 || k + 1 == n;
        if k < CHECK_EVERY_FROM || k % CHECK_STRIDE == CHECK_STRIDE - 1 || exhausted {
            let (theta, last) = tridiagonal_eigen(&alphas, &betas).ok()?;
            let (mut imax, mut imin) = (0, 0);
            for i in 1..theta.len() {
                if theta[i] > theta[imax] {
                    imax = i;
                }
                if theta[i] < theta[imin] {
                    imin = i;
                }
            }
            let (top, other) = if theta[imax].abs() >= theta[imin].abs() {
                (imax, imin)
            } else {
                (imin, imax)
            };
            let estimate = theta[top].abs();
            let residual = beta * last[top].abs();
            let gap = theta
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != top)
                .map(|(_, t)| (t - theta[top]).abs())
                .fold(f64::INFINITY, f64::min);
            let settled = residual.min(residual * residual / gap) <= tol * estimate;
            let dominated = theta[other].abs() + beta * last[other].abs() <= estimate;
            if estimate > 0.0 && settled && dominated {
                return Some(estimate);
            }
        }
        if exhausted {
            return None;
        }
        betas.push(beta);
        let next: Vec<f64> = w.iter().map(|v| v / beta).collect();
        basis.push(std::mem::replace(&mut q, next));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream_rng(seed, 0);
        let b = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        (&b + b.transpose()) * 0.5
    }

    #[test]
    fn diagonal_and_identity() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -5.0, 2.0]));
        assert_relative_eq!(spectral_norm(&d, 1e-12).unwrap(), 5.0, max_relative = 1e-12);
        assert_relative_eq!(
            spectral_norm(&DMatrix::identity(7, 7), 1e-12).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        assert_eq!(spectral_norm(&DMatrix::zeros(4, 4), 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn random_symmetric_matches_dense() {
        for (n, seed) in [(200, 1), (50, 2), (300, 3)] {
            let a = random_symmetric(n, seed);
            let ours = spectral_norm(&a, 1e-10).unwrap();
            assert_relative_eq!(ours, dense_spectral_norm(&a), max_relative = 1e-8);
        }
    }

    #[test]
    fn psd_low_rank_matches_dense() {
        let mut rng = stream_rng(9, 0);
        let b: DMatrix<f64> = DMatrix::from_fn(120, 5, |_, _| StandardNormal.sample(&mut rng));
        let a = &b * b.transpose();
        assert_relative_eq!(
            spectral_norm(&a, 1e-10).unwrap(),
            dense_spectral_norm(&a),
            max_relative = 1e-8
        );
    }

    #[test]
    fn rejects_asymmetric_and_bad_tolerance() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 1.0]);
        assert!(matches!(
            spectral_norm(&a, 1e-10),
            Err(CovError::NotSymmetric { .. })
        ));
        assert!(spectral_norm(&DMatrix::identity(2, 2), 0.1).is_err());
        assert!(spectral_norm(&DMatrix::identity(2, 2), 1e-15).is_err());
    }

    #[test]
    fn deterministic() {
        let a = random_symmetric(80, 4);
        assert_eq!(
            spectral_norm(&a, 1e-10).unwrap().to_bits(),
            spectral_norm(&a, 1e-10).unwrap().to_bits()
        );
    }
}
