//! The approximately sparse family `diag(1, (I + eps sum xi_m A_m(lambda^m)) / 2)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;

use super::report::{CertificateReport, Check};
use super::ThetaIndex;
use crate::diagnostics::{gamma1, gamma2, spectral_norm, NORM_TOL};
use crate::error::{CovError, Result};
use crate::grid_kernel::{build_grid, max_asymmetry, KernelSpec};
use crate::rng::stream_rng;
use crate::sampling::cholesky_psd;

/// Monte Carlo draws used by the expected-supremum certificate.
pub const DEFAULT_MC_SAMPLES: usize = 400;

/// Parameters of the sparse family; `r`, `r*`, `eps` and `l` are derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseFamilySpec {
    pub q: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub n_samples: usize,
    pub beta: f64,
    pub m_const: f64,
    pub nu: f64,
}

impl Default for SparseFamilySpec {
    /// `q = 0.3, Gamma1 = 4.5, Gamma2 = 3.3, N = 30, beta = 1.5, M = 35, nu = 1.2e-3`,
    /// giving `r = 230` and `l = 21`.
    fn default() -> Self {
        Self {
            q: 0.3,
            gamma1: 4.5,
            gamma2: 3.3,
            n_samples: 30,
            beta: 1.5,
            m_const: 35.0,
            nu: 1.2e-3,
        }
    }
}

impl SparseFamilySpec {
    pub fn new(
        q: f64,
        gamma1: f64,
        gamma2: f64,
        n_samples: usize,
        beta: f64,
        m_const: f64,
        nu: f64,
    ) -> Result<Self> {
        let spec = Self {
            q,
            gamma1,
            gamma2,
            n_samples,
            beta,
            m_const,
            nu,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CovError::InvalidParameter(msg));
        if !(0.0..1.0).contains(&self.q) {
            return bad(format!("q must lie in [0, 1), got {}", self.q));
        }
        if !(self.gamma1 > 0.0 && self.gamma1.is_finite()) {
            return bad(format!("Gamma1 must be positive, got {}", self.gamma1));
        }
        if !(self.gamma2 > 0.0 && self.gamma2 < 6.0) {
            return bad(format!("Gamma2 must lie in (0, 6), got {}", self.gamma2));
        }
        if self.n_samples == 0 {
            return bad("N must be at least 1".into());
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return bad(format!("beta must exceed 1, got {}", self.beta));
        }
        if !(self.m_const > 0.0 && self.m_const.is_finite()) {
            return bad(format!("M must be positive, got {}", self.m_const));
        }
        if self.r() < 2 {
            return bad(format!(
                "Gamma2 = {} gives fewer than two coordinates",
                self.gamma2
            ));
        }
        if !(self.nu > 0.0 && self.nu < self.nu_cap()) {
            return bad(format!(
                "nu must lie in (0, {}), got {}",
                self.nu_cap(),
                self.nu
            ));
        }
        if self.nu * self.nu >= self.nu_beta_cap() {
            return bad(format!(
                "nu^2 must be below (beta - 1) / (54 beta) = {}",
                self.nu_beta_cap()
            ));
        }
        if self.ell() > self.r_star() {
            return Err(CovError::Precondition(format!(
                "row sparsity l = {} exceeds r* = {}",
                self.ell(),
                self.r_star()
            )));
        }
        if self.ell() as f64 * self.eps() >= 0.5 {
            return Err(CovError::NotPositiveSemidefinite {
                pivot: 0.5 - self.ell() as f64 * self.eps(),
            });
        }
        Ok(())
    }

    fn nu_cap(&self) -> f64 {
        (1.0 / (3.0 * self.m_const)).powf(1.0 / (1.0 - self.q))
    }

    fn nu_beta_cap(&self) -> f64 {
        (self.beta - 1.0) / (54.0 * self.beta)
    }

    /// `floor(exp(Gamma2^2 / 2)) - 1`.
    pub fn r(&self) -> usize {
        ((0.5 * self.gamma2 * self.gamma2).exp().floor() as usize).saturating_sub(1)
    }

    pub fn r_star(&self) -> usize {
        self.r() / 2
    }

    /// `nu sqrt(log r / N)`.
    pub fn eps(&self) -> f64 {
        self.nu * ((self.r() as f64).ln() / self.n_samples as f64).sqrt()
    }

    /// `max(ceil(Gamma1 eps^{-q} / 2) - 1, 0)`.
    pub fn ell(&self) -> usize {
        let x = (self.gamma1 * self.eps().powf(-self.q) / 2.0).ceil() - 1.0;
        x.max(0.0) as usize
    }

    /// Matrix size `r + 1`.
    pub fn n(&self) -> usize {
        self.r() + 1
    }

    /// Lower bound `1/2 - l eps` on the smallest eigenvalue of every member.
    pub fn lambda_lower(&self) -> f64 {
        0.5 - self.ell() as f64 * self.eps()
    }

    /// Side conditions under which the family yields the minimax bound; informational.
    pub fn preconditions(&self) -> CertificateReport {
        let mut report = CertificateReport::new("sparse_preconditions");
        let (n, q) = (self.n_samples as f64, self.q);
        report.push(Check::le("nu_cap", self.nu, self.nu_cap()));
        report.push(Check::le(
            "nu_beta_cap",
            self.nu * self.nu,
            self.nu_beta_cap(),
        ));
        report.push(Check::le(
            "sample_power",
            n.powf(self.beta),
            self.r() as f64,
        ));
        let cap = self.m_const * n.powf((1.0 - q) / 2.0) * self.gamma2.powf(q - 3.0);
        report.push(Check::le("gamma1_cap", self.gamma1, cap));
        report.push(Check::le(
            "row_sparsity",
            self.ell() as f64,
            self.r_star() as f64,
        ));
        report.push(Check::ge(
            "column_load_robustness",
            self.gamma1,
            1.0 / (2f64.powf(q) - 1.0),
        ));
        report
    }

    /// `Lambda` with exactly `l` ones per row, filled greedily into the least-loaded columns.
    pub fn random_lambda(&self, seed: u64) -> Vec<Vec<usize>> {
        let rs = self.r_star();
        let ell = self.ell();
        let mut rng = stream_rng(seed, 1);
        let mut load = vec![0usize; rs];
        let mut rows = Vec::with_capacity(rs);
        for _ in 0..rs {
            let mut cols: Vec<usize> = (0..rs).collect();
            cols.shuffle(&mut rng);
            cols.sort_by_key(|&c| load[c]);
            let mut row: Vec<usize> = cols[..ell].to_vec();
            row.sort_unstable();
            for &c in &row {
                load[c] += 1;
            }
            rows.push(row);
        }
        rows
    }

    pub fn random_theta(&self, seed: u64) -> ThetaIndex {
        let mut rng = stream_rng(seed, 0);
        let xi = (0..self.r_star()).map(|_| rng.random_bool(0.5)).collect();
        ThetaIndex::Sparse {
            xi,
            lambda_rows: self.random_lambda(seed),
        }
    }

    /// Checks the shape of `Lambda` and its column loads.
    pub fn validate_lambda(&self, rows: &[Vec<usize>]) -> Result<()> {
        let rs = self.r_star();
        let ell = self.ell();
        if rows.len() != rs {
            return Err(CovError::DimensionMismatch {
                expected: rs,
                actual: rows.len(),
            });
        }
        let mut load = vec![0usize; rs];
        for (m, row) in rows.iter().enumerate() {
            if row.len() != ell {
                return Err(CovError::InvalidParameter(format!(
                    "Lambda row {m} has {} ones, expected {ell}",
                    row.len()
                )));
            }
            let mut seen = vec![false; rs];
            for &c in row {
                if c >= rs || seen[c] {
                    return Err(CovError::InvalidParameter(format!(
                        "Lambda row {m} has an invalid or repeated column {c}"
                    )));
                }
                seen[c] = true;
                load[c] += 1;
            }
        }
        if let Some((c, &l)) = load.iter().enumerate().find(|(_, &l)| l > 2 * ell) {
            return Err(CovError::InvalidParameter(format!(
                "Lambda column {c} has {l} ones, more than 2l = {}",
                2 * ell
            )));
        }
        Ok(())
    }

    /// Index of the first coordinate of the last `r*` block within the full matrix.
    fn tail_offset(&self) -> usize {
        1 + self.r() - self.r_star()
    }

    /// Whether row `1 + m` of a member carries its perturbation.
    pub(crate) fn row_active(&self, sigma: &DMatrix<f64>, m: usize) -> bool {
        (self.tail_offset()..self.n()).any(|j| sigma[(1 + m, j)] != 0.0)
    }

    /// Indicator of the last `r*` coordinates.
    pub fn witness(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n()];
        v[self.tail_offset()..].iter_mut().for_each(|x| *x = 1.0);
        v
    }
}

pub fn build_sparse_theta(spec: &SparseFamilySpec, theta: &ThetaIndex) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let (xi, rows) = match theta {
        ThetaIndex::Sparse { xi, lambda_rows } => (xi, lambda_rows),
        ThetaIndex::Banded(_) => {
            return Err(CovError::InvalidParameter(
                "sparse family needs a sparse theta".into(),
            ))
        }
    };
    if xi.len() != spec.r_star() {
        return Err(CovError::DimensionMismatch {
            expected: spec.r_star(),
            actual: xi.len(),
        });
    }
    spec.validate_lambda(rows)?;
    let n = spec.n();
    let mut m = DMatrix::zeros(n, n);
    m[(0, 0)] = 1.0;
    for i in 1..n {
        m[(i, i)] = 0.5;
    }
    let value = 0.5 * spec.eps();
    let offset = spec.tail_offset();
    for (k, row) in rows.iter().enumerate() {
        if !xi[k] {
            continue;
        }
        for &c in row {
            m[(1 + k, offset + c)] = value;
            m[(offset + c, 1 + k)] = value;
        }
    }
    Ok(m)
}

pub fn certify_sparse_membership(
    spec: &SparseFamilySpec,
    theta: &ThetaIndex,
    mc_samples: usize,
    seed: u64,
) -> Result<CertificateReport> {
    let sigma = build_sparse_theta(spec, theta)?;
    let n = spec.n();
    let mut report = CertificateReport::new("sparse");
    report.push(Check::le("symmetry", max_asymmetry(&sigma), 0.0));

    let grid = build_grid(n, 1)?;
    let lifted = KernelSpec::piecewise_constant(sigma.clone())?.discretize(&grid)?;
    report.push(Check::le("gamma1", gamma1(&lifted, spec.q)?, spec.gamma1));

    let factor = cholesky_psd(lifted.entries(), 0.0)?;
    let (est, se) = gamma2(&factor, &grid, mc_samples, seed)?;
    let sup_bound = (2.0 * (n as f64).ln()).sqrt();
    report.push(Check::le("gamma2_monte_carlo", est - 3.0 * se, sup_bound));
    report.push(Check::le("gamma2_bound", sup_bound, spec.gamma2));

    let support = gamma1(&lifted, 0.0)?;
    report.push(Check::le(
        "support_capacity",
        support * (-0.5 * spec.gamma2 * spec.gamma2).exp(),
        1.0,
    ));

    report.push(Check::close(
        "operator_norm",
        spectral_norm(&sigma, NORM_TOL)?,
        1.0,
        1e-10,
    ));
    let lambda_min = SymmetricEigen::new(sigma).eigenvalues.min();
    report.push(Check::ge(
        "lambda_min",
        lambda_min,
        spec.lambda_lower() - 1e-10,
    ));
    report.push(Check::ge(
        "lambda_min_positive",
        lambda_min,
        f64::MIN_POSITIVE,
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_derived_values() {
        let s = SparseFamilySpec::default();
        s.validate().unwrap();
        assert_eq!((s.r(), s.r_star(), s.ell()), (230, 115, 21));
        assert_relative_eq!(
            s.eps(),
            1.2e-3 * (230f64.ln() / 30.0).sqrt(),
            max_relative = 1e-15
        );
        assert!(s.preconditions().all_passed(), "{}", s.preconditions());
    }

    #[test]
    fn zero_xi_is_block_diagonal() {
        let s = SparseFamilySpec::default();
        let theta = ThetaIndex::Sparse {
            xi: vec![false; s.r_star()],
            lambda_rows: s.random_lambda(1),
        };
        let m = build_sparse_theta(&s, &theta).unwrap();
        let mut expected = DMatrix::identity(231, 231) * 0.5;
        expected[(0, 0)] = 1.0;
        assert_eq!(m, expected);
        let report = certify_sparse_membership(&s, &theta, 200, 5).unwrap();
        assert!(report.all_passed(), "{report}");
        assert_relative_eq!(
            gamma1(
                &KernelSpec::piecewise_constant(m)
                    .unwrap()
                    .discretize(&build_grid(231, 1).unwrap())
                    .unwrap(),
                1.0
            )
            .unwrap(),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn active_rows_have_l_entries() {
        let s = SparseFamilySpec::default();
        let theta = s.random_theta(9);
        let m = build_sparse_theta(&s, &theta).unwrap();
        let ThetaIndex::Sparse { xi, .. } = &theta else {
            unreachable!()
        };
        let value = s.eps() / 2.0;
        for (k, &on) in xi.iter().enumerate() {
            let count = (0..m.ncols())
                .filter(|&j| j != 1 + k && m[(1 + k, j)] == value)
                .count();
            assert_eq!(count, if on { s.ell() } else { 0 });
        }
        let e1 = m.column(0).into_owned();
        assert_eq!(&m * &e1, e1);
        let report = certify_sparse_membership(&s, &theta, DEFAULT_MC_SAMPLES, 2).unwrap();
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn lambda_load_violation_is_rejected() {
        let s = SparseFamilySpec::default();
        let ell = s.ell();
        let rows: Vec<Vec<usize>> = (0..s.r_star()).map(|_| (0..ell).collect()).collect();
        let theta = ThetaIndex::Sparse {
            xi: vec![true; s.r_star()],
            lambda_rows: rows,
        };
        assert!(build_sparse_theta(&s, &theta).is_err());
        let loads = s
            .random_lambda(4)
            .iter()
            .flatten()
            .fold(vec![0; s.r_star()], |mut acc, &c| {
                acc[c] += 1;
                acc
            });
        assert!(loads.iter().all(|&l| l <= 2 * ell));
    }

    #[test]
    fn invalid_nu_is_rejected() {
        assert!(SparseFamilySpec::new(0.3, 4.5, 3.3, 30, 1.5, 35.0, 0.01).is_err());
    }
}
