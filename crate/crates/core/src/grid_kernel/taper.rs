//! Compactly supported taper weights.

use crate::error::{CovError, Result};

/// Tensor-product taper `prod_i min((2k - |x_i - y_i|)_+ / k, 1)`.
pub fn taper_weight(x: &[f64], y: &[f64], kappa: f64) -> Result<f64> {
    check(x, y, kappa)?;
    Ok(product_form(x, y, kappa))
}

/// The same taper written as a signed sum of `2^d` shifted products.
pub fn taper_weight_sumform(x: &[f64], y: &[f64], kappa: f64) -> Result<f64> {
    check(x, y, kappa)?;
    let d = x.len();
    let gaps: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - b).abs()).collect();
    let mut total = 0.0;
    for mask in 0u32..(1u32 << d) {
        let mut term = 1.0;
        let mut sign_exp = 0u32;
        for (i, gap) in gaps.iter().enumerate() {
            let sigma = if mask & (1 << i) != 0 { 2.0 } else { 1.0 };
            sign_exp += sigma as u32;
            term *= (sigma * kappa - gap).max(0.0);
        }
        total += if sign_exp % 2 == 0 { term } else { -term };
    }
    Ok(total / kappa.powi(d as i32))
}

pub(crate) fn product_form(x: &[f64], y: &[f64], kappa: f64) -> f64 {
    let mut w = 1.0;
    for (a, b) in x.iter().zip(y) {
        let f = ((2.0 * kappa - (a - b).abs()).max(0.0) / kappa).min(1.0);
        if f == 0.0 {
            return 0.0;
        }
        w *= f;
    }
    w
}

fn check(x: &[f64], y: &[f64], kappa: f64) -> Result<()> {
    if x.len() != y.len() {
        return Err(CovError::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(CovError::InvalidParameter(format!(
            "taper radius must be positive, got {kappa}"
        )));
    }
    Ok(())
}
