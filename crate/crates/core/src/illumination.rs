//! Resolution of the illumination protocol: the leading-order coefficient
//! `Θ` of the fidelity lower bound `F⁻ ≃ (1 - ξ√Θ)/2`, and the exact bound
//! from the full Gaussian fidelity.

use alloc::vec::Vec;
use core::fmt;

use crate::dynamics::{Source, UTrajectory, MODULUS_SLACK};
use crate::gaussian::{self, infidelity};
use crate::{Error, Result, C64};

/// Reflectivity above which the small-`ξ` expansion is flagged.
pub const XI_WARN: f64 = 0.05;

/// Squeezing `r`, reflectivity `ξ` and inverse temperature `β`, with the
/// derived `n̄ = 1/(e^β - 1)`, `κ₁ = n̄(n̄+1)` and `κ₂ = 2n̄+1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlluminationParams {
    r: f64,
    xi: f64,
    beta: f64,
    n_bar: f64,
}

impl IlluminationParams {
    pub fn new(r: f64, xi: f64, beta: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::domain("IlluminationParams", "squeezing must be non-negative", r));
        }
        if !(xi > 0.0 && xi < 1.0) {
            return Err(Error::domain("IlluminationParams", "reflectivity must lie in (0, 1)", xi));
        }
        if xi > XI_WARN {
            log::warn!("reflectivity {xi} is not small; the leading-order F⁻ may be inaccurate");
        }
        let n_bar = gaussian::mean_thermal_occupation(beta)?;
        Ok(IlluminationParams { r, xi, beta, n_bar })
    }

    pub fn with_r(&self, r: f64) -> Result<Self> {
        IlluminationParams::new(r, self.xi, self.beta)
    }

    pub fn with_xi(&self, xi: f64) -> Result<Self> {
        IlluminationParams::new(self.r, xi, self.beta)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_bar(&self) -> f64 {
        self.n_bar
    }

    pub fn kappa1(&self) -> f64 {
        self.n_bar * (self.n_bar + 1.0)
    }

    pub fn kappa2(&self) -> f64 {
        2.0 * self.n_bar + 1.0
    }

    fn sinh2_r(&self) -> f64 {
        let s = libm::sinh(self.r);
        s * s
    }

    fn sinh2_2r(&self) -> f64 {
        let s = libm::sinh(2.0 * self.r);
        s * s
    }
}

/// `Θ_ideal = (sinh²r - n̄)²/(4κ₁) + [sinh²(2r)/4]/(1 + n̄ + κ₂ sinh²r)`.
pub fn theta_ideal(p: &IlluminationParams) -> f64 {
    theta_steady_unchecked(p, 1.0)
}

/// Long-time coefficient with residue `Z`:
/// `(Z² sinh²r - n̄)²/(4κ₁) + [Z⁴ sinh²(2r)/4]/(1 + n̄ + κ₂ Z² sinh²r)`.
pub fn theta_steady(p: &IlluminationParams, z: f64) -> Result<f64> {
    if !(0.0..=1.0 + MODULUS_SLACK).contains(&z) {
        return Err(Error::domain("theta_steady", "residue must lie in [0, 1]", z));
    }
    Ok(theta_steady_unchecked(p, z))
}

fn theta_steady_unchecked(p: &IlluminationParams, z: f64) -> f64 {
    let z2 = z * z;
    let sh2 = p.sinh2_r();
    let first = (z2 * sh2 - p.n_bar).powi(2) / (4.0 * p.kappa1());
    let second = 0.25 * z2 * z2 * p.sinh2_2r() / (1.0 + p.n_bar + p.kappa2() * z2 * sh2);
    first + second
}

/// Time-dependent coefficient at decoherence factor `u`,
///
/// `Θ = {1 + 4κ₁[1 + 2 sinh²(2r)|u|⁴] + λ₁N + λ₂N² + λ₃N³} / {16κ₁(1 + κ₂N)}`
///
/// with `N = 2|u|² sinh²r + 1`, `λ₁ = 2n̄(4κ₁+κ₂) - 1`, `λ₂ = -1 - 8κ₁`,
/// `λ₃ = κ₂`. It depends on `u` only through `|u|`.
pub fn theta_noisy(p: &IlluminationParams, u: C64) -> Result<f64> {
    let m2 = u.norm_sqr();
    if !(m2 <= (1.0 + MODULUS_SLACK) * (1.0 + MODULUS_SLACK)) {
        return Err(Error::domain("theta_noisy", "|u| exceeds one", libm::sqrt(m2)));
    }
    let (k1, k2, n) = (p.kappa1(), p.kappa2(), p.n_bar);
    let big_n = 2.0 * m2 * p.sinh2_r() + 1.0;
    let l1 = 2.0 * n * (4.0 * k1 + k2) - 1.0;
    let l2 = -1.0 - 8.0 * k1;
    let l3 = k2;
    let num = 1.0 + 4.0 * k1 * (1.0 + 2.0 * p.sinh2_2r() * m2 * m2) + big_n * (l1 + big_n * (l2 + big_n * l3));
    Ok(num / (16.0 * k1 * (1.0 + k2 * big_n)))
}

/// `F⁻ ≃ (1 - ξ√Θ)/2`.
pub fn f_minus_approx(p: &IlluminationParams, theta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::domain("f_minus_approx", "Θ must be non-negative", theta));
    }
    let x = p.xi * libm::sqrt(theta);
    if x > 1.0 {
        return Err(Error::domain("f_minus_approx", "ξ√Θ exceeds one; the expansion is invalid", x));
    }
    Ok(0.5 * (1.0 - x))
}

/// `F⁻ = [1 - √(1-F)]/2` from the full fidelity between the target-absent
/// and target-present states at decoherence factor `u`.
pub fn f_minus_exact(p: &IlluminationParams, u: C64) -> Result<f64> {
    let sigma = gaussian::signal_idler_cov(p.r, u)?;
    let n_t = u.norm_sqr() * p.sinh2_r();
    let sigma0 = gaussian::received_cov_target_absent(p.n_bar, n_t)?;
    let sigma1 = gaussian::received_cov_target_present(p.xi, &sigma, &sigma0)?;
    Ok(0.5 * (1.0 - libm::sqrt(infidelity(&sigma0, &sigma1)?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ApproxLeadingOrder,
    ExactFidelity,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::ApproxLeadingOrder, Method::ExactFidelity];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ApproxLeadingOrder => "approx_leading_order",
            Method::ExactFidelity => "exact_fidelity",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == name)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    Ideal,
    Bma,
    NonMarkov,
    Asymptotic,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Ideal, Regime::Bma, Regime::NonMarkov, Regime::Asymptotic];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Ideal => "ideal",
            Regime::Bma => "bma",
            Regime::NonMarkov => "nonmarkov",
            Regime::Asymptotic => "asymptotic",
        }
    }

    pub fn parse(name: &str) -> Option<Regime> {
        Regime::ALL.into_iter().find(|r| r.as_str() == name)
    }
}

impl From<Source> for Regime {
    fn from(s: Source) -> Self {
        match s {
            Source::Ideal => Regime::Ideal,
            Source::Bma => Regime::Bma,
            Source::Volterra | Source::Oracle => Regime::NonMarkov,
            Source::Asymptotic => Regime::Asymptotic,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `F⁻(t)` along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionSeries {
    pub times: Vec<f64>,
    pub f_minus: Vec<f64>,
    pub method: Method,
    pub regime: Regime,
}

impl ResolutionSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.f_minus.last().copied()
    }
}

/// `F⁻` at a single decoherence factor.
pub fn f_minus_at(p: &IlluminationParams, u: C64, method: Method) -> Result<f64> {
    match method {
        Method::ApproxLeadingOrder => f_minus_approx(p, theta_noisy(p, u)?),
        Method::ExactFidelity => f_minus_exact(p, u),
    }
}

pub fn resolution_series(p: &IlluminationParams, traj: &UTrajectory, method: Method) -> Result<ResolutionSeries> {
    let mut times = Vec::with_capacity(traj.len());
    let mut f_minus = Vec::with_capacity(traj.len());
    for (t, u) in traj.iter() {
        times.push(t);
        f_minus.push(f_minus_at(p, u, method)?);
    }
    Ok(ResolutionSeries { times, f_minus, method, regime: traj.source().into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{u_bma, u_ideal};
    use crate::spectral::SpectralDensity;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(r: f64, beta: f64) -> IlluminationParams {
        IlluminationParams::new(r, 1e-3, beta).unwrap()
    }

    fn limit(p: &IlluminationParams) -> f64 {
        p.n_bar() / (4.0 * (p.n_bar() + 1.0))
    }

    // The coefficient exactly as typeset, with 8 sinh²(2r) in the numerator.
    fn theta_noisy_typeset(p: &IlluminationParams, u: C64) -> f64 {
        let (k1, k2, n) = (p.kappa1(), p.kappa2(), p.n_bar());
        let m2 = u.norm_sqr();
        let big_n = 2.0 * m2 * p.sinh2_r() + 1.0;
        let l = [2.0 * n * (4.0 * k1 + k2) - 1.0, -1.0 - 8.0 * k1, k2];
        let num = 1.0 + 4.0 * k1 * (1.0 + 8.0 * p.sinh2_2r() * m2 * m2) + l[0] * big_n + l[1] * big_n * big_n + l[2] * big_n.powi(3);
        num / (16.0 * k1 * (1.0 + k2 * big_n))
    }

    #[test]
    fn derived_quantities() {
        let p = params(1.0, 1.0);
        assert_relative_eq!(p.n_bar(), 0.581_976_706_869_326_424_39, max_relative = 1e-14);
        assert!((p.kappa2().powi(2) - 1.0 - 4.0 * p.kappa1()).abs() < 1e-14);
        assert!(IlluminationParams::new(1.0, 0.0, 1.0).is_err());
        assert!(IlluminationParams::new(-1.0, 1e-3, 1.0).is_err());
        assert!(IlluminationParams::new(1.0, 1e-3, 0.0).is_err());
    }

    #[test]
    fn ideal_special_cases() {
        let p = params(0.0, 1.0);
        assert!((theta_ideal(&p) - limit(&p)).abs() < 1e-15);
        // sinh²r = n̄ removes the first term.
        let q = params(1.0, 1.0);
        let r = libm::asinh(libm::sqrt(q.n_bar()));
        let q = q.with_r(r).unwrap();
        let expect = 0.25 * q.sinh2_2r() / (1.0 + q.n_bar() + q.kappa2() * q.n_bar());
        assert!((theta_ideal(&q) - expect).abs() < 1e-14);
    }

    #[test]
    fn typeset_coefficient_misses_the_ideal_limit() {
        let p = params(1.0, 1.0);
        let u = C64::new(1.0, 0.0);
        assert!((theta_noisy_typeset(&p, u) - theta_ideal(&p)).abs() > 1.0);
        assert!((theta_noisy(&p, u).unwrap() - theta_ideal(&p)).abs() < 1e-12);
    }

    #[test]
    fn zero_coherence_limit_is_r_independent() {
        for beta in [0.5, 1.0, 2.0] {
            let vals: Vec<f64> = [0.0, 1.0, 2.0].iter().map(|&r| theta_noisy(&params(r, beta), C64::new(0.0, 0.0)).unwrap()).collect();
            let steady: Vec<f64> = [0.0, 1.0, 2.0].iter().map(|&r| theta_steady(&params(r, beta), 0.0).unwrap()).collect();
            let l = limit(&params(0.0, beta));
            for v in vals.iter().chain(&steady) {
                assert!((v - l).abs() < 1e-12, "{v} vs {l}");
            }
        }
    }

    #[test]
    fn f_minus_approx_values() {
        let p = params(1.0, 1.0);
        assert_eq!(f_minus_approx(&p, 0.0).unwrap(), 0.5);
        assert!((f_minus_approx(&p, 4.0).unwrap() - 0.499).abs() < 1e-15);
        assert!(f_minus_approx(&p, 4e6 + 1.0).is_err());
    }

    #[test]
    fn ideal_plateaus_decrease_with_squeezing() {
        let f: Vec<f64> = [0.5, 1.0, 1.5].iter().map(|&r| f_minus_approx(&params(r, 1.0), theta_ideal(&params(r, 1.0))).unwrap()).collect();
        assert!(f[0] > f[1] && f[1] > f[2]);
    }

    #[test]
    fn pipeline_matches_exact_fidelity() {
        // (1 - F)/ξ² → Θ; checked through F⁻ at small ξ.
        for (r, beta, m) in [(1.0, 1.0, 1.0), (1.0, 2.0, 0.7), (0.4, 0.5, 0.2), (1.8, 2.0, 0.9)] {
            let p = IlluminationParams::new(r, 1e-5, beta).unwrap();
            let u = C64::from_polar(m, -2.3);
            let approx = f_minus_approx(&p, theta_noisy(&p, u).unwrap()).unwrap();
            let exact = f_minus_exact(&p, u).unwrap();
            assert!((approx - exact).abs() < 1e-8, "r={r} β={beta} |u|={m}: {approx} vs {exact}");
        }
    }

    #[test]
    fn exact_bound_limits() {
        let p = IlluminationParams::new(1.0, 1e-12, 1.0).unwrap();
        assert!((f_minus_exact(&p, C64::from_polar(1.0, -5.0)).unwrap() - 0.5).abs() < 1e-9);
        // r = 0 closed form
        let p = params(0.0, 1.0);
        let exact = f_minus_exact(&p, C64::new(0.3, 0.4)).unwrap();
        let approx = f_minus_approx(&p, limit(&p)).unwrap();
        assert!((exact - approx).abs() < 1e-6);
    }

    #[test]
    fn ideal_series_is_constant() {
        let p = params(1.0, 1.0);
        let s = resolution_series(&p, &u_ideal(400.0, 0.5).unwrap(), Method::ApproxLeadingOrder).unwrap();
        assert_eq!(s.regime, Regime::Ideal);
        let first = s.f_minus[0];
        assert!(s.f_minus.iter().all(|&f| (f - first).abs() < 1e-15));
    }

    #[test]
    fn bma_series_approaches_the_r_independent_limit() {
        let sd = SpectralDensity::new(0.05, 0.8, 10.0).unwrap();
        let tr = u_bma(&sd, 400.0, 1.0).unwrap();
        for r in [0.5, 1.0, 1.5] {
            let p = params(r, 1.0);
            let s = resolution_series(&p, &tr, Method::ApproxLeadingOrder).unwrap();
            assert_eq!(s.regime, Regime::Bma);
            let target = f_minus_approx(&p, limit(&p)).unwrap();
            assert!((s.last().unwrap() - target).abs() < 1e-12);
        }
    }

    #[test]
    fn names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.as_str()), Some(m));
        }
        for r in Regime::ALL {
            assert_eq!(Regime::parse(r.as_str()), Some(r));
        }
        assert_eq!(Regime::from(Source::Oracle), Regime::NonMarkov);
    }

    proptest! {
        #[test]
        fn unit_modulus_reduces_to_ideal(r in 0.0f64..2.5, beta in 0.1f64..5.0, phase in 0.0f64..6.3) {
            let p = params(r, beta);
            let t = theta_noisy(&p, C64::from_polar(1.0, phase)).unwrap();
            prop_assert!((t - theta_ideal(&p)).abs() <= 1e-10 * theta_ideal(&p).max(1.0));
        }

        #[test]
        fn steady_at_unit_residue_is_ideal(r in 0.0f64..2.5, beta in 0.1f64..5.0) {
            let p = params(r, beta);
            prop_assert!((theta_steady(&p, 1.0).unwrap() - theta_ideal(&p)).abs() <= 1e-12 * theta_ideal(&p).max(1.0));
        }

        #[test]
        fn noisy_equals_steady_at_matching_modulus(r in 0.0f64..2.5, beta in 0.1f64..5.0, z in 0.0f64..1.0) {
            let p = params(r, beta);
            let a = theta_noisy(&p, C64::new(z, 0.0)).unwrap();
            let b = theta_steady(&p, z).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * b.max(1.0));
        }

        #[test]
        fn depends_on_modulus_only(r in 0.0f64..2.0, beta in 0.3f64..3.0, m in 0.0f64..1.0, a in 0.0f64..6.3, b in 0.0f64..6.3) {
            let p = params(r, beta);
            let (u, v) = (C64::from_polar(m, a), C64::from_polar(m, b));
            let (tu, tv) = (theta_noisy(&p, u).unwrap(), theta_noisy(&p, v).unwrap());
            prop_assert!((tu - tv).abs() <= 1e-12 * tu.max(1.0));
            prop_assert!((f_minus_exact(&p, u).unwrap() - f_minus_exact(&p, v).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn series_values_in_range(r in 0.0f64..2.0, beta in 0.3f64..3.0, m in 0.0f64..1.0, exact in proptest::bool::ANY) {
            let p = params(r, beta);
            let method = if exact { Method::ExactFidelity } else { Method::ApproxLeadingOrder };
            let f = f_minus_at(&p, C64::new(m, 0.0), method).unwrap();
            prop_assert!((-1e-9..=0.5 + 1e-9).contains(&f));
        }
    }
}
