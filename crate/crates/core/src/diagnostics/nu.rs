//! Tail sequences `nu_m` controlling off-diagonal kernel mass.

use std::collections::HashMap;
use std::sync::Mutex;

use libm::erfc;

use super::quadrature::integrate_to_infinity;
use crate::error::{CovError, Result};
use crate::grid_kernel::MaternSmoothness;

/// Radial profile `K(r)` of an isotropic base kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialProfile {
    SquaredExponential,
    Matern(MaternSmoothness),
    /// `(1 + r)^{-power}`; integrable against `r^{d-1}` only when `power > d`.
    Rational {
        power: f64,
    },
}

impl RadialProfile {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            Self::SquaredExponential => (-0.5 * r * r).exp(),
            Self::Matern(s) => s.profile(r),
            Self::Rational { power } => (1.0 + r).powf(-power),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NuSource {
    /// `erfc(m / sqrt 2) / erfc(1 / sqrt 2)`.
    ClosedFormSeD1,
    /// `exp(-(m - 1))`.
    ClosedFormExponential,
    /// Normalized tail integral of `r^{d-1} K(r)`.
    Numeric { profile: RadialProfile, dim: usize },
    /// Tabulated values starting at `m = 1`; later indices repeat the last entry.
    Explicit(Vec<f64>),
    /// `m^{-alpha}`.
    PowerLaw { alpha: f64 },
    /// `exp(-rate m^power)`, taken literally (so `nu_1 = exp(-rate)`).
    ExpPower { rate: f64, power: f64 },
}

impl NuSource {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ClosedFormSeD1 | Self::ClosedFormExponential => Ok(()),
            Self::Numeric { profile, dim } => {
                if *dim == 0 {
                    return Err(CovError::InvalidParameter(
                        "dimension must be at least 1".into(),
                    ));
                }
                if let RadialProfile::Rational { power } = profile {
                    if !power.is_finite() {
                        return Err(CovError::InvalidParameter(
                            "rational profile power must be finite".into(),
                        ));
                    }
                }
                Ok(())
            }
            Self::Explicit(table) => {
                if table.is_empty() || (table[0] - 1.0).abs() > 1e-12 {
                    return Err(CovError::InvalidParameter(
                        "explicit table must start with 1".into(),
                    ));
                }
                if table.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(CovError::InvalidParameter(
                        "explicit table must be positive".into(),
                    ));
                }
                if table.windows(2).any(|w| w[1] > w[0]) {
                    return Err(CovError::InvalidParameter(
                        "explicit table must be non-increasing".into(),
                    ));
                }
                Ok(())
            }
            Self::PowerLaw { alpha } => {
                if *alpha > 0.0 && alpha.is_finite() {
                    Ok(())
                } else {
                    Err(CovError::InvalidParameter(format!(
                        "power-law exponent must be positive, got {alpha}"
                    )))
                }
            }
            Self::ExpPower { rate, power } => {
                if *rate > 0.0 && *power > 0.0 && rate.is_finite() && power.is_finite() {
                    Ok(())
                } else {
                    Err(CovError::InvalidParameter(
                        "exp-power rate and power must be positive".into(),
                    ))
                }
            }
        }
    }
}

/// `nu_m` for the given source, computed from scratch.
pub fn nu_tail(source: &NuSource, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(CovError::InvalidParameter(
            "tail index starts at m = 1".into(),
        ));
    }
    source.validate()?;
    if m == 1 && !matches!(source, NuSource::ExpPower { .. }) {
        return Ok(1.0);
    }
    let mf = m as f64;
    Ok(match source {
        NuSource::ClosedFormSeD1 => {
            erfc(mf / std::f64::consts::SQRT_2) / erfc(std::f64::consts::FRAC_1_SQRT_2)
        }
        NuSource::ClosedFormExponential => (-(mf - 1.0)).exp(),
        NuSource::Numeric { profile, dim } => {
            tail_integral(profile, *dim, mf)? / tail_integral(profile, *dim, 1.0)?
        }
        NuSource::Explicit(table) => table[(m - 1).min(table.len() - 1)],
        NuSource::PowerLaw { alpha } => mf.powf(-alpha),
        NuSource::ExpPower { rate, power } => (-rate * mf.powf(*power)).exp(),
    })
}

fn tail_integral(profile: &RadialProfile, dim: usize, from: f64) -> Result<f64> {
    let p = *profile;
    let integrand = move |r: f64| r.powi(dim as i32 - 1) * p.value(r);
    integrate_to_infinity(&integrand, from)
}

/// A tail sequence with memoized values.
#[derive(Debug)]
pub struct NuSequence {
    source: NuSource,
    cache: Mutex<HashMap<usize, f64>>,
}

impl NuSequence {
    pub fn new(source: NuSource) -> Result<Self> {
        source.validate()?;
        Ok(Self {
            source,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn source(&self) -> &NuSource {
        &self.source
    }

    pub fn value(&self, m: usize) -> Result<f64> {
        if let Some(v) = self.cache.lock().expect("nu cache poisoned").get(&m) {
            return Ok(*v);
        }
        let v = nu_tail(&self.source, m)?;
        self.cache.lock().expect("nu cache poisoned").insert(m, v);
        Ok(v)
    }
}

impl Clone for NuSequence {
    fn clone(&self) -> Self {
        let cache = self.cache.lock().expect("nu cache poisoned").clone();
        Self {
            source: self.source.clone(),
            cache: Mutex::new(cache),
        }
    }
}

impl PartialEq for NuSequence {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normalization_at_one() {
        for s in [
            NuSource::ClosedFormSeD1,
            NuSource::ClosedFormExponential,
            NuSource::Numeric {
                profile: RadialProfile::SquaredExponential,
                dim: 2,
            },
            NuSource::PowerLaw { alpha: 0.5 },
        ] {
            assert_eq!(nu_tail(&s, 1).unwrap(), 1.0);
        }
    }

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(
            nu_tail(&NuSource::ClosedFormExponential, 3).unwrap(),
            0.1353352832366127,
            max_relative = 1e-12
        );
        let se = nu_tail(&NuSource::ClosedFormSeD1, 2).unwrap();
        assert_relative_eq!(
            se,
            0.04550026389635842 / 0.31731050786291415,
            max_relative = 1e-12
        );
        let gauss = NuSource::ExpPower {
            rate: 0.5,
            power: 2.0,
        };
        assert_relative_eq!(
            nu_tail(&gauss, 1).unwrap(),
            (-0.5f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            nu_tail(&gauss, 3).unwrap(),
            (-4.5f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn numeric_matches_closed_forms() {
        let se = NuSource::Numeric {
            profile: RadialProfile::SquaredExponential,
            dim: 1,
        };
        let ex = NuSource::Numeric {
            profile: RadialProfile::Matern(MaternSmoothness::Half),
            dim: 1,
        };
        for m in 1..=8 {
            let a = nu_tail(&se, m).unwrap();
            let b = nu_tail(&NuSource::ClosedFormSeD1, m).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-8);
            let c = nu_tail(&ex, m).unwrap();
            let d = nu_tail(&NuSource::ClosedFormExponential, m).unwrap();
            assert_relative_eq!(c, d, max_relative = 1e-8);
        }
    }

    #[test]
    fn non_integrable_profile_errors() {
        let s = NuSource::Numeric {
            profile: RadialProfile::Rational { power: 1.0 },
            dim: 1,
        };
        assert!(matches!(nu_tail(&s, 2), Err(CovError::NoConvergence(_))));
        let ok = NuSource::Numeric {
            profile: RadialProfile::Rational { power: 3.0 },
            dim: 1,
        };
        assert_relative_eq!(nu_tail(&ok, 3).unwrap(), 4.0 / 16.0, max_relative = 1e-9);
    }

    #[test]
    fn explicit_table_validation_and_extension() {
        assert!(NuSequence::new(NuSource::Explicit(vec![0.9, 0.5])).is_err());
        assert!(NuSequence::new(NuSource::Explicit(vec![1.0, 0.5, 0.6])).is_err());
        let s = NuSequence::new(NuSource::Explicit(vec![1.0, 0.5, 0.25])).unwrap();
        assert_eq!(s.value(3).unwrap(), 0.25);
        assert_eq!(s.value(10).unwrap(), 0.25);
    }

    #[test]
    fn memoized_values_are_stable() {
        let s = NuSequence::new(NuSource::Numeric {
            profile: RadialProfile::Matern(MaternSmoothness::ThreeHalves),
            dim: 1,
        })
        .unwrap();
        let a = s.value(4).unwrap();
        assert_eq!(a, s.value(4).unwrap());
        assert_eq!(a, s.clone().value(4).unwrap());
        assert!(a < s.value(3).unwrap());
    }
}
