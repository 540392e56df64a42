//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};

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

/// One 15-point Kronrod rule on `[a, b]`: `(integral, error estimate)`.
pub fn gauss_kronrod15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-15, rel_tol: 1e-12, max_depth: 40 }
    }
}

/// Recursive bisection until each piece meets its share of the tolerance.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (whole, err) = gauss_kronrod15(&mut f, a, b);
    let tol = opts.abs_tol.max(opts.rel_tol * whole.abs());
    let v = refine(&mut f, a, b, whole, err, tol, opts.max_depth)?;
    if !v.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integral on [{a}, {b}]")));
    }
    Ok(v)
}

fn refine(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, whole: f64, err: f64, tol: f64, depth: u32) -> Result<f64> {
    if err <= tol {
        return Ok(whole);
    }
    if depth == 0 {
        return Err(Error::Quadrature(format!("depth exhausted on [{a}, {b}], error estimate {err:.3e}")));
    }
    let m = 0.5 * (a + b);
    let (l, le) = gauss_kronrod15(f, a, m);
    let (r, re) = gauss_kronrod15(f, m, b);
    if le + re <= tol {
        return Ok(l + r);
    }
    Ok(refine(f, a, m, l, le, 0.5 * tol, depth - 1)? + refine(f, m, b, r, re, 0.5 * tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_mass() {
        let v = integrate(|x| (-0.5 * x * x).exp(), -12.0, 12.0, QuadOptions::default()).unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sharp_peak_refines() {
        let v = integrate(|x| 1e-3 / (1e-6 + (x - 0.3).powi(2)), 0.0, 1.0, QuadOptions::default()).unwrap();
        let exact = (0.7f64 / 1e-3).atan() + (0.3f64 / 1e-3).atan();
        assert!((v - exact).abs() < 1e-10, "{v} {exact}");
    }
}
