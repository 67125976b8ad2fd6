//! Globally adaptive Gauss-Kronrod quadrature (10-point Gauss, 21-point
//! Kronrod) for real and complex integrands on finite intervals.

use alloc::collections::BinaryHeap;
use core::cmp::Ordering;
use core::ops::{Add, Mul, Sub};

use crate::{Error, Result, C64};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_643_474_695,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        libm::fabs(self)
    }
}

impl QuadValue for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        libm::hypot(self.re, self.im)
    }
}

/// Stopping rule: the summed error estimate must fall below
/// `max(abs, rel · |value|)` before `max_intervals` subintervals are used.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel, max_intervals: 4000 }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::new(1e-13, 1e-12)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

/// Single application of the 21-point Kronrod rule on `[a, b]`, returning the
/// Kronrod value and the difference to the embedded Gauss rule.
pub fn kronrod21<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = T::zero();
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    let err = (kronrod - gauss).magnitude();
    (kronrod, err)
}

/// Fixed 10-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss10<T: QuadValue, F: FnMut(f64) -> T>(mut f: F, a: f64, b: f64) -> T {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = T::zero();
    for (i, w) in WG.iter().enumerate() {
        let dx = half * XGK[2 * i + 1];
        acc = acc + (f(center - dx) + f(center + dx)) * *w;
    }
    acc * half
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[points[0], points[last]]`, starting from the panels
/// delimited by `points` (which must be strictly increasing) and bisecting the
/// panel with the largest error estimate until the tolerance is met.
pub fn integrate<T, F>(mut f: F, points: &[f64], tol: Tolerance) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if points.len() < 2 {
        return Err(Error::domain("integrate", "need at least two breakpoints", points.len() as f64));
    }
    let mut heap = BinaryHeap::with_capacity(2 * points.len() + 16);
    let mut value = T::zero();
    let mut error = 0.0;
    let mut evaluations = 0usize;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            return Err(Error::domain("integrate", "breakpoints must increase", b - a));
        }
        let (v, e) = kronrod21(&mut f, a, b);
        evaluations += 21;
        value = value + v;
        error += e;
        heap.push(Panel { a, b, value: v, error: e });
    }

    loop {
        let target = tol.abs.max(tol.rel * value.magnitude());
        if error <= target {
            break;
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::NonConvergence { op: "integrate", estimate: error, tolerance: target });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Panel cannot be split further in floating point.
            return Err(Error::NonConvergence { op: "integrate", estimate: error, tolerance: target });
        }
        let (vl, el) = kronrod21(&mut f, worst.a, mid);
        let (vr, er) = kronrod21(&mut f, mid, worst.b);
        evaluations += 42;
        value = value - worst.value + vl + vr;
        error += el + er - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: vl, error: el });
        heap.push(Panel { a: mid, b: worst.b, value: vr, error: er });
    }

    // Re-sum to shed the rounding drift of the running total.
    let mut value = T::zero();
    let mut error = 0.0;
    for p in heap.iter() {
        value = value + p.value;
        error += p.error;
    }
    Ok(Estimate { value, error, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x: f64| x * x * x - 2.0 * x, &[0.0, 2.0], Tolerance::default()).unwrap();
        assert!((est.value - 0.0).abs() < 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫₀¹ x^{-1/2} dx = 2
        let est = integrate(|x: f64| 1.0 / libm::sqrt(x), &[0.0, 1.0], Tolerance::new(1e-12, 1e-12)).unwrap();
        assert!((est.value - 2.0).abs() < 1e-11, "{}", est.value);
    }

    #[test]
    fn complex_oscillatory() {
        // ∫₀^{10} e^{-ix} dx = (1 - e^{-10i}) / i
        let est = integrate(
            |x: f64| C64::new(0.0, -x).exp(),
            &[0.0, 10.0],
            Tolerance::default(),
        )
        .unwrap();
        let exact = (C64::new(1.0, 0.0) - C64::new(0.0, -10.0).exp()) / C64::new(0.0, 1.0);
        assert!((est.value - exact).norm() < 1e-13);
    }

    #[test]
    fn bad_breakpoints() {
        assert!(integrate(|x: f64| x, &[1.0, 0.0], Tolerance::default()).is_err());
        assert!(integrate(|x: f64| x, &[1.0], Tolerance::default()).is_err());
    }

    #[test]
    fn reports_nonconvergence() {
        let tol = Tolerance { abs: 1e-15, rel: 0.0, max_intervals: 8 };
        let r = integrate(|x: f64| 1.0 / x, &[0.0, 1.0], tol);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }
}
