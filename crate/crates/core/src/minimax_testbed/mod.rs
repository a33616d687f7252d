//! Lower-bound parameter families as explicit matrices, with numerical certificates.
//!
//! Families are never enumerated. Builders take an explicit index `theta`, and
//! certificates sample random members and random neighbouring pairs from seeded
//! streams.

mod banded;
mod report;
mod sparse;

pub use banded::{
    build_f1_banded, build_f2_banded, build_f2_family, build_f3_banded, build_f3_family,
    certify_f2_membership, certify_f3_membership, BandedFamily, BandedFamilySpec, BandedKind,
    F1Family,
};
pub use report::{CertificateReport, Check};
pub use sparse::{
    build_sparse_theta, certify_sparse_membership, SparseFamilySpec, DEFAULT_MC_SAMPLES,
};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::diagnostics::{kl_gaussian, spectral_norm, NORM_TOL};
use crate::error::{CovError, Result};
use crate::rng::{mix_seed, stream_rng};

/// Index of a family member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ThetaIndex {
    Banded(Vec<bool>),
    /// `xi` switches rows on; `lambda_rows[m]` lists the `l` columns of row `m` in the last block.
    Sparse {
        xi: Vec<bool>,
        lambda_rows: Vec<Vec<usize>>,
    },
}

impl ThetaIndex {
    pub fn bits(&self) -> &[bool] {
        match self {
            Self::Banded(b) => b,
            Self::Sparse { xi, .. } => xi,
        }
    }

    /// Hamming distance of the switching bits.
    pub fn hamming(&self, other: &ThetaIndex) -> Result<usize> {
        let same_kind = matches!(
            (self, other),
            (Self::Banded(_), Self::Banded(_)) | (Self::Sparse { .. }, Self::Sparse { .. })
        );
        if !same_kind {
            return Err(CovError::InvalidParameter(
                "theta indices come from different families".into(),
            ));
        }
        let (a, b) = (self.bits(), other.bits());
        if a.len() != b.len() {
            return Err(CovError::DimensionMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
    }

    /// Copy with switching bit `k` flipped.
    pub fn flipped(&self, k: usize) -> ThetaIndex {
        let mut out = self.clone();
        match &mut out {
            Self::Banded(b) => b[k] = !b[k],
            Self::Sparse { xi, .. } => xi[k] = !xi[k],
        }
        out
    }
}

/// A family that can build members from indices.
#[derive(Debug, Clone)]
pub enum Family {
    Banded(BandedFamily),
    Sparse(SparseFamilySpec),
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Banded(f) if f.kind() == BandedKind::F2 => "f2",
            Self::Banded(_) => "f3",
            Self::Sparse(_) => "sparse",
        }
    }

    pub fn build(&self, theta: &ThetaIndex) -> Result<DMatrix<f64>> {
        match self {
            Self::Banded(f) => f.build(theta),
            Self::Sparse(s) => build_sparse_theta(s, theta),
        }
    }

    pub fn random_theta(&self, seed: u64) -> ThetaIndex {
        match self {
            Self::Banded(f) => f.random_theta(seed),
            Self::Sparse(s) => s.random_theta(seed),
        }
    }

    /// `count` random pairs at Hamming distance one.
    pub fn random_neighbour_pairs(&self, count: usize, seed: u64) -> Vec<(ThetaIndex, ThetaIndex)> {
        (0..count)
            .map(|k| {
                let s = mix_seed(seed, &[k as u64]);
                let theta = self.random_theta(s);
                let len = theta.bits().len();
                let flip = stream_rng(s, 2).random_range(0..len);
                let other = theta.flipped(flip);
                (theta, other)
            })
            .collect()
    }

    /// Second count of the Hamming distance, read off the assembled matrices.
    pub fn support_difference(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
        match self {
            Self::Banded(f) => f.active_row_difference(a, b),
            Self::Sparse(s) => (0..s.r_star())
                .filter(|&m| s.row_active(a, m) != s.row_active(b, m))
                .count(),
        }
    }

    /// Per-coordinate witness `(v, |(Sigma - Sigma') v|_i)` on every switched row.
    fn witness(&self) -> (Vec<f64>, f64) {
        match self {
            Self::Banded(f) => {
                let g = (f.gamma_side() as f64).powi(f.spec().dim as i32);
                (f.witness(), f.amplitude() * g)
            }
            Self::Sparse(s) => (s.witness(), s.ell() as f64 * s.eps() / 2.0),
        }
    }

    /// Lower bound on `min ||Sigma - Sigma'|| / H` from the proofs.
    fn alpha_bound(&self) -> f64 {
        match self {
            Self::Banded(f) => f.amplitude(),
            Self::Sparse(s) => s.ell() as f64 * s.eps() / s.r() as f64,
        }
    }

    /// Bound on the squared Frobenius norm of a Hamming-one difference.
    fn frobenius_bound(&self) -> f64 {
        match self {
            Self::Banded(f) => {
                2.0 * f.amplitude().powi(2) * (f.band() as f64).powi(f.spec().dim as i32)
            }
            Self::Sparse(s) => 2.0 * s.ell() as f64 * (s.eps() / 2.0).powi(2),
        }
    }

    /// Lower bound on the smallest eigenvalue of every member.
    pub fn lambda_lower(&self) -> f64 {
        match self {
            Self::Banded(_) => 0.75,
            Self::Sparse(s) => s.lambda_lower(),
        }
    }
}

/// Outcome of [`assouad_terms`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssouadReport {
    pub alpha_min: f64,
    pub worst_kl: Option<f64>,
    pub worst_frobenius_sq: Option<f64>,
    pub pairs: usize,
    pub unit_pairs: usize,
    pub certificate: CertificateReport,
}

struct PairTerms {
    hamming: usize,
    support_hamming: usize,
    ratio: f64,
    witness_ratio: f64,
    unit: Option<UnitTerms>,
}

struct UnitTerms {
    kl: f64,
    frobenius_sq: f64,
    contraction: f64,
}

fn pair_terms(family: &Family, pair: &(ThetaIndex, ThetaIndex)) -> Result<Option<PairTerms>> {
    let h = pair.0.hamming(&pair.1)?;
    if h == 0 {
        return Ok(None);
    }
    let s1 = family.build(&pair.0)?;
    let s2 = family.build(&pair.1)?;
    let diff = &s1 - &s2;
    let norm = spectral_norm(&diff, NORM_TOL)?;
    let (v, per_row) = family.witness();
    let dv = &diff * DVector::from_vec(v);
    let witness_ratio = dv.norm() / ((h as f64).sqrt() * per_row);
    let unit = if h == 1 {
        Some(UnitTerms {
            kl: kl_gaussian(&s1, &s2)?,
            frobenius_sq: diff.norm_squared(),
            contraction: norm / family.lambda_lower(),
        })
    } else {
        None
    };
    Ok(Some(PairTerms {
        hamming: h,
        support_hamming: family.support_difference(&s1, &s2),
        ratio: norm / h as f64,
        witness_ratio,
        unit,
    }))
}

/// Minimum separation per unit Hamming distance, worst KL and worst squared Frobenius
/// distance over the Hamming-one pairs, with the inequalities of the proofs checked.
pub fn assouad_terms(family: &Family, pairs: &[(ThetaIndex, ThetaIndex)]) -> Result<AssouadReport> {
    let terms: Vec<PairTerms> = pairs
        .par_iter()
        .map(|p| pair_terms(family, p))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if terms.is_empty() {
        return Err(CovError::InvalidParameter(
            "no pair with positive Hamming distance".into(),
        ));
    }
    let alpha_min = terms.iter().map(|t| t.ratio).fold(f64::INFINITY, f64::min);
    let witness = terms
        .iter()
        .map(|t| t.witness_ratio)
        .fold(f64::INFINITY, f64::min);
    let mismatched = terms
        .iter()
        .filter(|t| t.hamming != t.support_hamming)
        .count();
    let units: Vec<&UnitTerms> = terms.iter().filter_map(|t| t.unit.as_ref()).collect();

    let mut cert = CertificateReport::new(format!("{}_assouad", family.label()));
    cert.push(Check::ge("alpha_min", alpha_min, family.alpha_bound()));
    cert.push(Check::ge("witness", witness, 1.0 - 1e-12));
    cert.push(Check::le("hamming_mismatches", mismatched as f64, 0.0));
    let (mut worst_kl, mut worst_frob) = (None, None);
    if !units.is_empty() {
        let c = family.lambda_lower().powi(-2);
        let kl_ratio = units
            .iter()
            .map(|u| u.kl / (c * u.frobenius_sq))
            .fold(0.0, f64::max);
        let frob = units.iter().map(|u| u.frobenius_sq).fold(0.0, f64::max);
        let contraction = units.iter().map(|u| u.contraction).fold(0.0, f64::max);
        cert.push(Check::le("kl_regime", contraction, 0.5));
        cert.push(Check::le("kl_over_frobenius", kl_ratio, 1.0));
        cert.push(Check::le(
            "frobenius_sq",
            frob,
            family.frobenius_bound() * (1.0 + 1e-12),
        ));
        worst_kl = Some(units.iter().map(|u| u.kl).fold(0.0, f64::max));
        worst_frob = Some(frob);
    }
    Ok(AssouadReport {
        alpha_min,
        worst_kl,
        worst_frobenius_sq: worst_frob,
        pairs: terms.len(),
        unit_pairs: units.len(),
        certificate: cert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{NuSequence, NuSource};

    fn f2_desk() -> Family {
        let nu = NuSequence::new(NuSource::PowerLaw { alpha: 0.5 }).unwrap();
        Family::Banded(build_f2_family(&BandedFamilySpec::desk(nu)).unwrap())
    }

    #[test]
    fn hamming_and_flip() {
        let a = ThetaIndex::Banded(vec![true, false, true]);
        assert_eq!(a.hamming(&a.flipped(1)).unwrap(), 1);
        let s = ThetaIndex::Sparse {
            xi: vec![true, false, true],
            lambda_rows: vec![],
        };
        assert!(a.hamming(&s).is_err());
    }

    #[test]
    fn f2_unit_pairs_satisfy_proof_inequalities() {
        let fam = f2_desk();
        let pairs = fam.random_neighbour_pairs(20, 7);
        let rep = assouad_terms(&fam, &pairs).unwrap();
        assert_eq!(rep.unit_pairs, 20);
        assert!(rep.certificate.all_passed(), "{}", rep.certificate);
    }

    #[test]
    fn sparse_unit_pairs_satisfy_proof_inequalities() {
        let fam = Family::Sparse(SparseFamilySpec::default());
        let pairs = fam.random_neighbour_pairs(10, 3);
        let rep = assouad_terms(&fam, &pairs).unwrap();
        assert!(rep.certificate.all_passed(), "{}", rep.certificate);
    }

    #[test]
    fn general_pairs_and_exclusions() {
        let fam = f2_desk();
        let a = fam.random_theta(1);
        let b = fam.random_theta(2);
        let rep = assouad_terms(&fam, &[(a.clone(), a.clone()), (a.clone(), b)]).unwrap();
        assert_eq!(rep.pairs, 1);
        assert!(rep.certificate.all_passed(), "{}", rep.certificate);
        assert!(assouad_terms(&fam, &[(a.clone(), a.clone())]).is_err());
        let sparse = Family::Sparse(SparseFamilySpec::default()).random_theta(1);
        assert!(assouad_terms(&fam, &[(a, sparse)]).is_err());
    }
}
