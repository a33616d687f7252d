//! The diagonal family and the two piecewise-constant banded families.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::report::{CertificateReport, Check};
use super::ThetaIndex;
use crate::diagnostics::{operator_quantities, spectral_norm, NuSequence, NORM_TOL};
use crate::error::{CovError, Result};
use crate::grid_kernel::{build_grid, cells_per_axis, max_asymmetry, KernelSpec};
use crate::rng::stream_rng;

/// Parameters shared by the diagonal and banded constructions.
#[derive(Debug, Clone)]
pub struct BandedFamilySpec {
    pub r: usize,
    pub n_samples: usize,
    pub dim: usize,
    pub w: f64,
    pub tau: f64,
    pub nu: NuSequence,
}

impl BandedFamilySpec {
    pub fn new(
        r: usize,
        n_samples: usize,
        dim: usize,
        w: f64,
        tau: f64,
        nu: NuSequence,
    ) -> Result<Self> {
        let spec = Self {
            r,
            n_samples,
            dim,
            w,
            tau,
            nu,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `r = 256, N = 200, d = 1, w = 1, tau = 0.003`.
    pub fn desk(nu: NuSequence) -> Self {
        Self {
            r: 256,
            n_samples: 200,
            dim: 1,
            w: 1.0,
            tau: 0.003,
            nu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 2 {
            return Err(CovError::InvalidParameter(format!(
                "r must exceed 1, got {}",
                self.r
            )));
        }
        if self.dim == 0 {
            return Err(CovError::InvalidParameter(
                "dimension must be at least 1".into(),
            ));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(CovError::InvalidParameter(format!(
                "w must be positive, got {}",
                self.w
            )));
        }
        let tau_max = 4f64.powi(-(self.dim as i32) - 1);
        if !(self.tau > 0.0 && self.tau < tau_max) {
            return Err(CovError::InvalidParameter(format!(
                "tau must lie in (0, {tau_max}), got {}",
                self.tau
            )));
        }
        if (self.n_samples as f64) <= (self.r as f64).ln() {
            return Err(CovError::Precondition(format!(
                "N = {} must exceed log r = {}",
                self.n_samples,
                (self.r as f64).ln()
            )));
        }
        Ok(())
    }

    pub fn m_star(&self) -> Result<usize> {
        crate::diagnostics::m_star(&self.nu, self.n_samples, self.dim)
    }

    /// `sqrt(tau log r / N)`.
    pub fn delta(&self) -> f64 {
        (self.tau * (self.r as f64).ln() / self.n_samples as f64).sqrt()
    }
}

/// Diagonal members `w I - w delta e_l e_l^T`, `l = 0..=r`, with `l = 0` the unperturbed member.
#[derive(Debug, Clone, PartialEq)]
pub struct F1Family {
    r: usize,
    w: f64,
    delta: f64,
}

pub fn build_f1_banded(spec: &BandedFamilySpec) -> Result<F1Family> {
    spec.validate()?;
    let delta = spec.delta();
    if delta >= 1.0 {
        return Err(CovError::NotPositiveSemidefinite {
            pivot: spec.w * (1.0 - delta),
        });
    }
    Ok(F1Family {
        r: spec.r,
        w: spec.w,
        delta,
    })
}

impl F1Family {
    pub fn len(&self) -> usize {
        self.r + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `w delta`, the distance of every perturbed member from the base member.
    pub fn separation(&self) -> f64 {
        self.w * self.delta
    }

    pub fn diagonal(&self, l: usize) -> Result<Vec<f64>> {
        if l > self.r {
            return Err(CovError::InvalidParameter(format!(
                "member index {l} exceeds r = {}",
                self.r
            )));
        }
        let mut d = vec![self.w; self.r];
        if l > 0 {
            d[l - 1] -= self.w * self.delta;
        }
        Ok(d)
    }

    pub fn member(&self, l: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            self.diagonal(l)?,
        )))
    }

    /// Verifies `||Sigma_0 - Sigma_l|| = w delta` for every `l >= 1` and positivity of every member.
    pub fn certify(&self) -> Result<CertificateReport> {
        let mut report = CertificateReport::new("f1");
        let base = self.member(0)?;
        let target = self.separation();
        let mut worst = target;
        for l in 1..=self.r {
            let d = &base - self.member(l)?;
            let norm = spectral_norm(&d, NORM_TOL)?;
            if (norm - target).abs() > (worst - target).abs() {
                worst = norm;
            }
        }
        report.push(Check::close("separation", worst, target, 1e-12 * target));
        report.push(Check::ge("min_diagonal", self.w * (1.0 - self.delta), 0.0));
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandedKind {
    F2,
    F3,
}

/// A piecewise-constant banded family on `S^d` cells: unit diagonal plus an amplitude-`a`
/// pattern linking each perturbation cell `i` to the cells `j` with `i_a < j_a < B`.
#[derive(Debug, Clone)]
pub struct BandedFamily {
    kind: BandedKind,
    spec: BandedFamilySpec,
    side: usize,
    gamma_side: usize,
    band: usize,
    amplitude: f64,
    m_star: usize,
}

/// Family with `K = floor((m* - 1) / (2 sqrt d))`, amplitude `tau h_N` and band `2K`.
pub fn build_f2_family(spec: &BandedFamilySpec) -> Result<BandedFamily> {
    spec.validate()?;
    let side = cells_per_axis(spec.r, spec.dim)?;
    let m_star = spec.m_star()?;
    if spec.r as f64 <= (m_star as f64).powi(spec.dim as i32) {
        return Err(CovError::Precondition(format!(
            "F2 requires r > m*^d (r = {}, m* = {m_star})",
            spec.r
        )));
    }
    let k = ((m_star - 1) as f64 / (2.0 * (spec.dim as f64).sqrt())).floor() as usize;
    if k == 0 {
        return Err(CovError::Precondition(format!(
            "F2 requires K >= 1, got m* = {m_star}"
        )));
    }
    let d = spec.dim as i32;
    let h_n = (k as f64).powi(-d) * ((m_star as f64).powi(d) / spec.n_samples as f64).sqrt();
    Ok(BandedFamily {
        kind: BandedKind::F2,
        spec: spec.clone(),
        side,
        gamma_side: k,
        band: 2 * k,
        amplitude: spec.tau * h_n,
        m_star,
    })
}

/// Family with `S/2` perturbation cells per axis, amplitude `tau / sqrt(N r)` and band `S`.
pub fn build_f3_family(spec: &BandedFamilySpec) -> Result<BandedFamily> {
    spec.validate()?;
    let side = cells_per_axis(spec.r, spec.dim)?;
    let m_star = spec.m_star()?;
    if spec.r as f64 >= (m_star as f64).powi(spec.dim as i32) {
        return Err(CovError::Precondition(format!(
            "F3 requires r < m*^d (r = {}, m* = {m_star})",
            spec.r
        )));
    }
    if side % 2 != 0 {
        return Err(CovError::Precondition(format!(
            "F3 requires an even number of cells per axis, got {side}"
        )));
    }
    Ok(BandedFamily {
        kind: BandedKind::F3,
        spec: spec.clone(),
        side,
        gamma_side: side / 2,
        band: side,
        amplitude: spec.tau / ((spec.n_samples * spec.r) as f64).sqrt(),
        m_star,
    })
}

pub fn build_f2_banded(spec: &BandedFamilySpec, theta: &ThetaIndex) -> Result<DMatrix<f64>> {
    build_f2_family(spec)?.build(theta)
}

pub fn build_f3_banded(spec: &BandedFamilySpec, theta: &ThetaIndex) -> Result<DMatrix<f64>> {
    build_f3_family(spec)?.build(theta)
}

pub fn certify_f2_membership(
    spec: &BandedFamilySpec,
    theta: &ThetaIndex,
) -> Result<CertificateReport> {
    build_f2_family(spec)?.certify(theta)
}

pub fn certify_f3_membership(
    spec: &BandedFamilySpec,
    theta: &ThetaIndex,
) -> Result<CertificateReport> {
    build_f3_family(spec)?.certify(theta)
}

impl BandedFamily {
    pub fn kind(&self) -> BandedKind {
        self.kind
    }

    pub fn spec(&self) -> &BandedFamilySpec {
        &self.spec
    }

    /// Cells per axis `S`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Perturbation cells per axis (`K` for F2, `S/2` for F3).
    pub fn gamma_side(&self) -> usize {
        self.gamma_side
    }

    /// Number of perturbation cells, the length of `theta`.
    pub fn gamma(&self) -> usize {
        self.gamma_side.pow(self.spec.dim as u32)
    }

    /// Exclusive upper cell index of the band (`2K` for F2, `S` for F3).
    pub fn band(&self) -> usize {
        self.band
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn m_star(&self) -> usize {
        self.m_star
    }

    /// `a B^d`, bounding the off-diagonal absolute row sum of every member.
    pub fn off_diagonal_budget(&self) -> f64 {
        self.amplitude * (self.band as f64).powi(self.spec.dim as i32)
    }

    pub fn n(&self) -> usize {
        self.spec.r
    }

    fn cell(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &k| acc * self.side + k)
    }

    fn cell_indices(&self, mut c: usize) -> Vec<usize> {
        let mut idx = vec![0; self.spec.dim];
        for a in (0..self.spec.dim).rev() {
            idx[a] = c % self.side;
            c /= self.side;
        }
        idx
    }

    /// Multi-indices in `{lo..hi-1}^d`, row-major.
    fn block(&self, lo: usize, hi: usize) -> Vec<Vec<usize>> {
        let d = self.spec.dim;
        let mut out = Vec::new();
        if hi <= lo {
            return out;
        }
        let mut idx = vec![lo; d];
        loop {
            out.push(idx.clone());
            let mut a = d;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < hi {
                    break;
                }
                idx[a] = lo;
            }
        }
    }

    /// Cell index of the `t`-th perturbation cell.
    pub fn gamma_cell(&self, t: usize) -> usize {
        let d = self.spec.dim;
        let mut idx = vec![0; d];
        let mut rest = t;
        for a in (0..d).rev() {
            idx[a] = rest % self.gamma_side;
            rest /= self.gamma_side;
        }
        self.cell(&idx)
    }

    /// Cells linked to the `t`-th perturbation cell.
    pub fn targets(&self, t: usize) -> Vec<usize> {
        let i = self.cell_indices(self.gamma_cell(t));
        let d = self.spec.dim;
        let mut out = Vec::new();
        let mut idx: Vec<usize> = i.iter().map(|&k| k + 1).collect();
        if idx.iter().any(|&k| k >= self.band) {
            return out;
        }
        loop {
            out.push(self.cell(&idx));
            let mut a = d;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < self.band {
                    break;
                }
                idx[a] = i[a] + 1;
            }
        }
    }

    /// Indicator of the cells `{g..B-1}^d`.
    pub fn witness(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n()];
        for idx in self.block(self.gamma_side, self.band) {
            v[self.cell(&idx)] = 1.0;
        }
        v
    }

    fn bits<'a>(&self, theta: &'a ThetaIndex) -> Result<&'a [bool]> {
        match theta {
            ThetaIndex::Banded(bits) if bits.len() == self.gamma() => Ok(bits),
            ThetaIndex::Banded(bits) => Err(CovError::DimensionMismatch {
                expected: self.gamma(),
                actual: bits.len(),
            }),
            ThetaIndex::Sparse { .. } => Err(CovError::InvalidParameter(
                "banded family needs a banded theta".into(),
            )),
        }
    }

    pub fn build(&self, theta: &ThetaIndex) -> Result<DMatrix<f64>> {
        let bits = self.bits(theta)?;
        let n = self.n();
        let mut m = DMatrix::identity(n, n);
        for (t, &on) in bits.iter().enumerate() {
            if !on {
                continue;
            }
            let i = self.gamma_cell(t);
            for j in self.targets(t) {
                m[(i, j)] = self.amplitude;
                m[(j, i)] = self.amplitude;
            }
        }
        Ok(m)
    }

    pub fn random_theta(&self, seed: u64) -> ThetaIndex {
        let mut rng = stream_rng(seed, 0);
        ThetaIndex::Banded((0..self.gamma()).map(|_| rng.random_bool(0.5)).collect())
    }

    /// Number of perturbation rows whose linked entries differ between two members.
    pub fn active_row_difference(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
        (0..self.gamma())
            .filter(|&t| {
                let i = self.gamma_cell(t);
                self.targets(t).into_iter().any(|j| a[(i, j)] != b[(i, j)])
            })
            .count()
    }

    /// Membership certificate for the member indexed by `theta`.
    pub fn certify(&self, theta: &ThetaIndex) -> Result<CertificateReport> {
        let sigma = self.build(theta)?;
        let label = match self.kind {
            BandedKind::F2 => "f2",
            BandedKind::F3 => "f3",
        };
        let mut report = CertificateReport::new(label);
        let n = self.n();
        let budget = self.off_diagonal_budget();

        report.push(Check::le("symmetry", max_asymmetry(&sigma), 0.0));
        report.push(Check::le("off_diagonal_budget", budget, 0.25));
        let mut gersh = f64::INFINITY;
        let mut l1 = 0.0f64;
        for j in 0..n {
            let col = sigma.column(j);
            let abs_sum: f64 = col.iter().map(|v| v.abs()).sum();
            gersh = gersh.min(2.0 * sigma[(j, j)] - abs_sum);
            l1 = l1.max(abs_sum);
        }
        report.push(Check::ge("gershgorin_lower", gersh, 0.75));
        let lambda_min = SymmetricEigen::new(sigma.clone()).eigenvalues.min();
        report.push(Check::ge("lambda_min", lambda_min, 0.75 - 1e-10));
        report.push(Check::le("l1_norm", l1, 1.0 + budget));

        let grid = build_grid(self.side, self.spec.dim)?;
        let lifted = KernelSpec::piecewise_constant(sigma.clone())?.discretize(&grid)?;
        let q = operator_quantities(&lifted)?;
        let sup_diag = lifted.entries().diagonal().max();
        report.push(Check::close("trace_op", q.trace_op, 1.0, 1e-10));
        report.push(Check::close("sup_diagonal", sup_diag, q.trace_op, 1e-10));
        let r = self.spec.r as f64;
        report.push(Check::ge("r_eff_lower", q.r_eff, 0.8 * r));
        report.push(Check::le("r_eff_upper", q.r_eff, r * (1.0 + NORM_TOL)));

        let d = self.spec.dim as f64;
        let m_star = self.m_star;
        let c_tail = budget / self.spec.nu.value(m_star - 1)?;
        report.push(Check::le(
            "tail_constant",
            c_tail,
            self.spec.tau * 2f64.powf(1.5 * d),
        ));
        let tails = self.tails(&sigma, q.r_eff, m_star + 1);
        for (m, tail) in (1..=m_star + 1).zip(tails) {
            let name = format!("tail_m{m}");
            let check = if m >= m_star {
                Check::le(name, tail, 0.0)
            } else if (m as f64) >= d.sqrt() {
                Check::le(name, tail, c_tail * q.op_norm * self.spec.nu.value(m)?)
            } else {
                Check::le(name, tail, 1.25 * q.op_norm)
            };
            report.push(check);
        }
        Ok(report)
    }

    /// `max_i sum_{j : dist(I_i, I_j) > m r_eff^{-1/d}} |Sigma_ij| / M` for `m = 1..=m_max`,
    /// with the cell distance taken as the largest point distance between the two cells.
    fn tails(&self, sigma: &DMatrix<f64>, r_eff: f64, m_max: usize) -> Vec<f64> {
        let n = self.n();
        let d = self.spec.dim;
        let unit = (n as f64 / r_eff).powf(1.0 / d as f64);
        let mut worst = vec![0.0f64; m_max];
        let mut row_tail = vec![0.0f64; m_max];
        for i in 0..n {
            let ii = self.cell_indices(i);
            row_tail.iter_mut().for_each(|t| *t = 0.0);
            for j in 0..n {
                let v = sigma[(i, j)].abs();
                if v == 0.0 {
                    continue;
                }
                let jj = self.cell_indices(j);
                let dist = ii
                    .iter()
                    .zip(&jj)
                    .map(|(&a, &b)| {
                        let k = (a.abs_diff(b) + 1) as f64;
                        k * k
                    })
                    .sum::<f64>()
                    .sqrt();
                for (m, t) in row_tail.iter_mut().enumerate() {
                    if dist > (m + 1) as f64 * unit {
                        *t += v;
                    }
                }
            }
            for (w, t) in worst.iter_mut().zip(&row_tail) {
                *w = w.max(*t / n as f64);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::NuSource;
    use approx::assert_relative_eq;

    fn power_law(alpha: f64) -> NuSequence {
        NuSequence::new(NuSource::PowerLaw { alpha }).unwrap()
    }

    #[test]
    fn f1_separation_oracle() {
        let spec = BandedFamilySpec::new(16, 100, 1, 1.0, 0.01, power_law(0.5)).unwrap();
        let fam = build_f1_banded(&spec).unwrap();
        assert_eq!(fam.member(0).unwrap(), DMatrix::identity(16, 16));
        assert_relative_eq!(fam.separation(), 0.016651092223153956, max_relative = 1e-12);
        let report = fam.certify().unwrap();
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn f2_desk_geometry() {
        let fam = build_f2_family(&BandedFamilySpec::desk(power_law(0.5))).unwrap();
        assert_eq!(
            (fam.m_star(), fam.gamma_side(), fam.band(), fam.gamma()),
            (15, 7, 14, 7)
        );
        assert_eq!(fam.targets(0), (1..14).collect::<Vec<_>>());
        assert_eq!(fam.targets(6), (7..14).collect::<Vec<_>>());
        let zero = ThetaIndex::Banded(vec![false; 7]);
        assert_eq!(fam.build(&zero).unwrap(), DMatrix::identity(256, 256));
    }

    #[test]
    fn f2_requires_large_r() {
        let spec = BandedFamilySpec::new(15, 200, 1, 1.0, 0.003, power_law(0.5)).unwrap();
        assert!(matches!(
            build_f2_family(&spec),
            Err(CovError::Precondition(_))
        ));
    }

    #[test]
    fn f2_full_theta_certificate() {
        let fam = build_f2_family(&BandedFamilySpec::desk(power_law(0.5))).unwrap();
        let report = fam.certify(&ThetaIndex::Banded(vec![true; 7])).unwrap();
        assert!(report.all_passed(), "{report}");
        let r_eff = report.get("r_eff_lower").unwrap().value;
        assert!((204.8..=256.0).contains(&r_eff));
        assert_eq!(report.get("tail_m15").unwrap().value, 0.0);
    }

    #[test]
    fn f2_two_dimensional() {
        let spec = BandedFamilySpec::new(400, 200, 2, 1.0, 0.003, power_law(1.0)).unwrap();
        let fam = build_f2_family(&spec).unwrap();
        assert!(fam.gamma_side() >= 1);
        let theta = fam.random_theta(3);
        let report = fam.certify(&theta).unwrap();
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn f3_amplitude_and_certificate() {
        let spec = BandedFamilySpec::new(64, 200, 1, 1.0, 0.003, power_law(0.1)).unwrap();
        let fam = build_f3_family(&spec).unwrap();
        let theta = fam.random_theta(11);
        let m = fam.build(&theta).unwrap();
        let a = 0.003 / (200.0f64 * 64.0).sqrt();
        for i in 0..64 {
            for j in 0..64 {
                if i != j && m[(i, j)] != 0.0 {
                    assert_eq!(m[(i, j)], a);
                }
            }
        }
        let report = fam.certify(&theta).unwrap();
        assert!(report.all_passed(), "{report}");
        let too_big = BandedFamilySpec::desk(power_law(0.5));
        assert!(build_f3_family(&too_big).is_err());
    }
}
