//! Adaptive 7/15-point Gauss–Kronrod quadrature.

use crate::error::{CovError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Integral of `f` over `[a, b]` by recursive bisection until the Kronrod–Gauss
/// gap of every panel falls below its share of `abs_tol + rel_tol * |I|`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let (whole, _) = gk15(f, a, b);
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    let target = abs_tol.max(rel_tol * whole.abs());
    while let Some((lo, hi, depth)) = stack.pop() {
        let (value, err) = gk15(f, lo, hi);
        if !value.is_finite() {
            return Err(CovError::NoConvergence("integrand is not finite".into()));
        }
        let share = target * (hi - lo) / (b - a);
        if err <= share || err <= 1e-15 * value.abs() {
            total += value;
        } else if depth >= 48 {
            return Err(CovError::NoConvergence(format!(
                "quadrature on [{lo}, {hi}] did not refine"
            )));
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(total)
}

/// Integral over `[a, inf)` by summing panels `[a, 2a], [2a, 4a], ...` until a
/// panel adds less than `1e-14` of the running total.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64) -> Result<f64> {
    let mut lo = a;
    let mut hi = if a > 0.0 { 2.0 * a } else { 1.0 };
    let mut total = 0.0;
    for _ in 0..80 {
        let piece = integrate(f, lo, hi, 1e-300, 1e-13)?;
        total += piece;
        if piece.abs() <= 1e-14 * total.abs() || (piece == 0.0 && total == 0.0) {
            return Ok(total);
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(CovError::NoConvergence(
        "tail integral did not converge; integrand may not be integrable".into(),
    ))
}
