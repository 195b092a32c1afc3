//! Globally adaptive Gauss–Kronrod (7/15) integration.
//!
//! Used for the pointer oracle and for the thermal velocity average. The
//! integrand may be real or complex.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

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

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// A value type the integrator can accumulate.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-14,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral<T> {
    pub value: T,
    pub abs_error: f64,
    pub evaluations: usize,
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

fn gauss_kronrod<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod = kronrod + sum * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + sum * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).magnitude())
}

/// Integrates `f` over `[a, b]` until the summed error estimate is below
/// `max(tol.abs, tol.rel * |I|)`.
pub fn integrate<T, F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral<T>>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    integrate_with_breaks(f, &[a, b], tol)
}

/// Like [`integrate`], but starts from the partition given by `breaks`
/// (sorted, first and last are the limits). Narrow features far narrower
/// than the whole range must sit near a break or they can be missed.
pub fn integrate_with_breaks<T, F>(f: F, breaks: &[f64], tol: Tolerance) -> Result<Integral<T>>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if breaks.len() < 2 || breaks.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "integration breakpoints must be >= 2 finite values, got {breaks:?}"
        )));
    }
    if breaks.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(
            "integration breakpoints must be sorted".into(),
        ));
    }

    let mut segments = Vec::with_capacity(breaks.len() * 4);
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            continue;
        }
        let (value, error) = gauss_kronrod(&f, a, b);
        segments.push(Segment { a, b, value, error });
        evaluations += 15;
    }
    if segments.is_empty() {
        return Ok(Integral {
            value: T::zero(),
            abs_error: 0.0,
            evaluations: 0,
        });
    }

    loop {
        let total = segments.iter().fold(T::zero(), |acc, s| acc + s.value);
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        let target = tol.abs.max(tol.rel * total.magnitude());
        if total_error <= target {
            return Ok(Integral {
                value: total,
                abs_error: total_error,
                evaluations,
            });
        }
        if segments.len() >= tol.max_intervals {
            let scale = total.magnitude().max(f64::MIN_POSITIVE);
            return Err(Error::Accuracy {
                what: "adaptive quadrature".into(),
                estimate: total_error / scale,
            });
        }

        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval can no longer be bisected in floating point.
            let scale = total.magnitude().max(f64::MIN_POSITIVE);
            return Err(Error::Accuracy {
                what: "adaptive quadrature (interval underflow)".into(),
                estimate: total_error / scale,
            });
        }
        let (lv, le) = gauss_kronrod(&f, seg.a, mid);
        let (rv, re) = gauss_kronrod(&f, mid, seg.b);
        evaluations += 30;
        segments.push(Segment {
            a: seg.a,
            b: mid,
            value: lv,
            error: le,
        });
        segments.push(Segment {
            a: mid,
            b: seg.b,
            value: rv,
            error: re,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(
            |x: f64| x.powi(5) - 3.0 * x * x + 1.0,
            -1.0,
            2.0,
            Tolerance::default(),
        )
        .unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0) + 3.0;
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn gaussian_normalization() {
        let r = integrate(
            |x: f64| (-x * x / 2.0).exp() / (2.0 * PI).sqrt(),
            -12.0,
            12.0,
            Tolerance::default(),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-13);
    }

    #[test]
    fn narrow_lorentzian_complex() {
        // ∫ i/(g - i x) dx over [-L, L] = i * 2 atan(L/g) (real parts cancel).
        let g = 1e-3;
        let r = integrate(
            |x: f64| Complex64::i() / Complex64::new(g, -x),
            -1.0,
            1.0,
            Tolerance::default(),
        )
        .unwrap();
        let exact = 2.0 * (1.0 / g).atan();
        assert!(r.value.re.abs() < 1e-10);
        assert!((r.value.im - exact).abs() / exact < 1e-11);
    }

    #[test]
    fn breaks_catch_a_needle() {
        // A Lorentzian of width 1e-7 at 0.3 is invisible to a single 15-point rule.
        let g = 1e-7;
        let f = |x: f64| g / ((x - 0.3) * (x - 0.3) + g * g);
        let exact = (0.7 / g).atan() + (0.3 / g).atan();
        let r = integrate_with_breaks(f, &[0.0, 0.3, 1.0], Tolerance::default()).unwrap();
        assert!((r.value - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-15,
            max_intervals: 4,
        };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, tol).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }));
    }
}
