//! Ohmic-family baths and the single-excitation energy spectrum.
//!
//! The spectral density is `J(ω) = η ω^s ω_c^{1-s} e^{-ω/ω_c}`. Integrals over
//! the bath frequency are truncated at `Λ = 40 ω_c`, where the exponential
//! cutoff has suppressed the integrand below double precision.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::quad::{self, Tolerance};
use crate::{Error, Result, C64};

/// Mode frequency; every other frequency is measured in these units.
pub const OMEGA0: f64 = 1.0;

/// Upper integration cutoff in units of `ω_c`.
pub const CUTOFF_FACTOR: f64 = 40.0;

/// Agreement required between principal values at `Λ` and `2Λ`.
pub const LAMB_SHIFT_CONVERGENCE: f64 = 1e-8;

/// Relative tolerance of the bisection for the bound-state energy.
pub const BOUND_STATE_REL_TOL: f64 = 1e-12;

const BRACKET_DOUBLINGS: usize = 60;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;

/// Euler's gamma function.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Coupling at which a bound state appears, `η_c = ω₀ / (ω_c Γ(s))`.
pub fn threshold_eta(s: f64, omega_c: f64) -> f64 {
    OMEGA0 / (omega_c * gamma(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ohmicity {
    SubOhmic,
    Ohmic,
    SuperOhmic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensity {
    eta: f64,
    s: f64,
    omega_c: f64,
}

/// Isolated negative eigenenergy of the mode-plus-bath Hamiltonian in the
/// single-excitation subspace, with the residue it contributes to `u(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState {
    pub energy: f64,
    pub residue: f64,
}

/// Decay rate `κ = π J(ω₀)` and frequency shift `Δ(ω₀)` of the Born-Markov
/// limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmaConstants {
    pub kappa: f64,
    pub delta: f64,
}

impl SpectralDensity {
    pub fn new(eta: f64, s: f64, omega_c: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::domain("SpectralDensity", "coupling must be finite and non-negative", eta));
        }
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::domain("SpectralDensity", "Ohmicity index must be positive", s));
        }
        if !(omega_c.is_finite() && omega_c > 0.0) {
            return Err(Error::domain("SpectralDensity", "cutoff frequency must be positive", omega_c));
        }
        Ok(SpectralDensity { eta, s, omega_c })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        SpectralDensity::new(eta, self.s, self.omega_c)
    }

    pub fn with_s(&self, s: f64) -> Result<Self> {
        SpectralDensity::new(self.eta, s, self.omega_c)
    }

    pub fn ohmicity(&self) -> Ohmicity {
        if self.s < 1.0 {
            Ohmicity::SubOhmic
        } else if self.s == 1.0 {
            Ohmicity::Ohmic
        } else {
            Ohmicity::SuperOhmic
        }
    }

    /// Truncation point `Λ` of frequency integrals.
    pub fn cutoff(&self) -> f64 {
        CUTOFF_FACTOR * self.omega_c
    }

    /// `J(ω)` for `ω ≥ 0`.
    pub fn j(&self, omega: f64) -> Result<f64> {
        if !(omega >= 0.0) {
            return Err(Error::domain("evaluate_j", "frequency must be non-negative", omega));
        }
        Ok(self.j_at(omega))
    }

    // Caller guarantees omega >= 0.
    pub(crate) fn j_at(&self, omega: f64) -> f64 {
        if omega == 0.0 || self.eta == 0.0 {
            return 0.0;
        }
        self.eta * libm::pow(omega, self.s) * libm::pow(self.omega_c, 1.0 - self.s) * libm::exp(-omega / self.omega_c)
    }

    /// `J'(ω)` for `ω > 0`.
    pub(crate) fn dj_at(&self, omega: f64) -> f64 {
        self.j_at(omega) * (self.s / omega - 1.0 / self.omega_c)
    }

    /// `∫₀^∞ J(ω) dω = η ω_c² Γ(s+1)`.
    pub fn total_weight(&self) -> f64 {
        self.eta * self.omega_c * self.omega_c * gamma(self.s + 1.0)
    }

    /// `∫₀^∞ J(ω)/ω dω = η ω_c Γ(s)`, the value of `ω₀ - ȳ(0⁻)`.
    pub fn inverse_moment(&self) -> f64 {
        self.eta * self.omega_c * gamma(self.s)
    }

    /// Memory kernel `μ(x) = ∫₀^∞ J(ω) e^{-iωx} dω`, evaluated in closed form
    /// as `η ω_c^{1-s} Γ(s+1) (1/ω_c + ix)^{-(s+1)}`.
    pub fn memory_kernel(&self, x: f64) -> Result<C64> {
        if !(x >= 0.0) {
            return Err(Error::domain("memory_kernel", "lag must be non-negative", x));
        }
        Ok(self.kernel_at(x))
    }

    pub(crate) fn kernel_at(&self, x: f64) -> C64 {
        if self.eta == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let a = 1.0 / self.omega_c;
        let p = self.s + 1.0;
        let prefactor = self.eta * libm::pow(self.omega_c, 1.0 - self.s) * gamma(p);
        let modulus = libm::pow(libm::hypot(a, x), -p);
        let phase = -p * libm::atan2(x, a);
        C64::from_polar(prefactor * modulus, phase)
    }

    /// Breakpoints that split `[0, Λ]` around the features of `J`.
    fn frequency_breaks(&self, extra: &[f64]) -> Vec<f64> {
        let lambda = self.cutoff();
        let wc = self.omega_c;
        let peak = self.s * wc;
        let mut pts: Vec<f64> = [0.0, 0.25 * wc, peak, 4.0 * wc, 10.0 * wc, lambda].to_vec();
        pts.extend(extra.iter().copied().filter(|&x| x > 0.0 && x < lambda));
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1e-300));
        pts.retain(|&x| x <= lambda);
        pts
    }

    /// `𝒫∫₀^Λ J(ω)/(E-ω) dω` by singularity subtraction, for `0 < E < Λ`.
    pub fn principal_value(&self, e: f64, lambda: f64) -> Result<f64> {
        if !(e > 0.0) {
            return Err(Error::domain("lamb_shift", "pole must lie inside the band (E > 0)", e));
        }
        if !(e < lambda) {
            return Err(Error::domain("lamb_shift", "pole must lie below the cutoff", e));
        }
        if self.eta == 0.0 {
            return Ok(0.0);
        }
        let je = self.j_at(e);
        let dje = self.dj_at(e);
        let integrand = |w: f64| {
            let d = e - w;
            if d.abs() < 1e-12 * e {
                -dje
            } else {
                (self.j_at(w) - je) / d
            }
        };
        let mut pts = self.frequency_breaks(&[e, 0.5 * e, 2.0 * e]);
        if lambda > self.cutoff() {
            pts.push(lambda);
        }
        let est = quad::integrate(integrand, &pts, Tolerance::new(1e-13, 1e-12))?;
        Ok(est.value + je * libm::log(e / (lambda - e)))
    }

    /// Frequency shift `Δ(E) = 𝒫∫₀^∞ J(ω)/(E-ω) dω` for `E > 0`, checked to
    /// be stable when the cutoff is doubled.
    pub fn lamb_shift(&self, e: f64) -> Result<f64> {
        let lambda = self.cutoff();
        let near = self.principal_value(e, lambda)?;
        let far = self.principal_value(e, 2.0 * lambda)?;
        let change = (far - near).abs();
        if change > LAMB_SHIFT_CONVERGENCE {
            return Err(Error::NonConvergence {
                op: "lamb_shift",
                estimate: change,
                tolerance: LAMB_SHIFT_CONVERGENCE,
            });
        }
        Ok(near)
    }

    /// `Δ(E)` with infinite cutoff from the series
    ///
    /// `Δ(E) = ηω_c e^{-ε} [π cot(πs) ε^s + Γ(s+1) Σₙ εⁿ/(n!(n-s))]`, `ε = E/ω_c`,
    ///
    /// with the logarithmic limit at integer `s`. Returns `None` within
    /// `1e-4` of a nonzero integer, where the two singular terms cancel badly.
    pub fn lamb_shift_series(&self, e: f64) -> Option<f64> {
        if !(e > 0.0) || !e.is_finite() {
            return None;
        }
        if self.eta == 0.0 {
            return Some(0.0);
        }
        let eps = e / self.omega_c;
        let m = libm::round(self.s);
        let delta = self.s - m;
        let integer = delta == 0.0;
        if !integer && delta.abs() < 1e-4 {
            return None;
        }
        // Poisson weights e^{-ε} εⁿ/n! keep every term O(1).
        let mut poisson = libm::exp(-eps);
        let mut sum = 0.0;
        let n_max = (eps + 12.0 * libm::sqrt(eps) + 40.0) as usize;
        for n in 0..=n_max {
            if n > 0 {
                poisson *= eps / n as f64;
            }
            if integer && n as f64 == m {
                continue;
            }
            sum += poisson / (n as f64 - self.s);
        }
        let edge = if integer {
            let harmonic: f64 = (1..=m as usize).map(|k| 1.0 / k as f64).sum();
            let digamma = -EULER_GAMMA + harmonic;
            libm::exp(-eps) * libm::pow(eps, m) * (libm::log(eps) - digamma)
        } else {
            PI / libm::tan(PI * self.s) * libm::pow(eps, self.s) * libm::exp(-eps)
        };
        Some(self.eta * self.omega_c * (edge + gamma(self.s + 1.0) * sum))
    }

    /// `∫₀^∞ J(ω)/(ω-E) dω` for `E ≤ 0`, where the integrand has no pole.
    pub fn regular_integral(&self, e: f64) -> Result<f64> {
        if !(e <= 0.0) {
            return Err(Error::domain("regular_integral", "use the principal value for E > 0", e));
        }
        if self.eta == 0.0 {
            return Ok(0.0);
        }
        let a = -e;
        let extra = geometric_breaks(a, self.omega_c);
        let pts = self.frequency_breaks(&extra);
        let est = quad::integrate(|w: f64| self.j_at(w) / (w + a), &pts, Tolerance::new(1e-15, 1e-14))?;
        Ok(est.value)
    }

    /// `ȳ(E) = ω₀ - ∫₀^∞ J(ω)/(ω-E) dω` on `E < 0`.
    pub fn y_bar(&self, e: f64) -> Result<f64> {
        if !(e < 0.0) {
            return Err(Error::domain("y_bar", "defined below the band edge only (E < 0)", e));
        }
        Ok(OMEGA0 - self.regular_integral(e)?)
    }

    /// `∫₀^∞ J(ω)/(E-ω)² dω` for `E < 0`.
    fn residue_integral(&self, e: f64) -> Result<f64> {
        let a = -e;
        let extra = geometric_breaks(a, self.omega_c);
        let pts = self.frequency_breaks(&extra);
        let est = quad::integrate(
            |w: f64| {
                let d = w + a;
                self.j_at(w) / (d * d)
            },
            &pts,
            Tolerance::new(1e-15, 1e-13),
        )?;
        Ok(est.value)
    }

    /// A bound state exists iff `η ω_c Γ(s) > ω₀`, i.e. `ȳ(0⁻) < 0`.
    pub fn bound_state_exists(&self) -> bool {
        self.inverse_moment() > OMEGA0
    }

    /// Solves `ȳ(E) = E` on `E < 0` by bisection and evaluates the residue
    /// `Z = [1 + ∫ J(ω)/(E_b-ω)² dω]⁻¹`.
    pub fn bound_state(&self) -> Result<Option<BoundState>> {
        if !self.bound_state_exists() {
            return Ok(None);
        }
        let f = |e: f64| -> Result<f64> { Ok(self.y_bar(e)? - e) };

        // f(0⁻) = ω₀ - η ω_c Γ(s) < 0 and f → +∞ as E → -∞.
        let mut hi = 0.0;
        let mut lo = -self.inverse_moment() - OMEGA0;
        let mut doublings = 0;
        while f(lo)? <= 0.0 {
            doublings += 1;
            if doublings > BRACKET_DOUBLINGS {
                return Err(Error::NonConvergence {
                    op: "find_bound_state",
                    estimate: lo,
                    tolerance: 0.0,
                });
            }
            lo *= 2.0;
        }

        let mut mid = 0.5 * (lo + hi);
        for _ in 0..400 {
            mid = 0.5 * (lo + hi);
            if hi - lo <= BOUND_STATE_REL_TOL * mid.abs() {
                break;
            }
            let fm = f(mid)?;
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let energy = if lo == hi { lo } else { mid };
        let residue = 1.0 / (1.0 + self.residue_integral(energy)?);
        Ok(Some(BoundState { energy, residue }))
    }

    /// `κ = π J(ω₀)` and `Δ(ω₀)`.
    pub fn bma_constants(&self) -> Result<BmaConstants> {
        Ok(BmaConstants {
            kappa: PI * self.j_at(OMEGA0),
            delta: self.lamb_shift(OMEGA0)?,
        })
    }
}

// Breakpoints a, 4a, 16a, ... below `limit`, resolving the 1/(ω+a) scale.
fn geometric_breaks(a: f64, limit: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if a <= 0.0 {
        return out;
    }
    let mut x = a;
    while x < limit && out.len() < 64 {
        out.push(x);
        x *= 4.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sd(eta: f64, s: f64, wc: f64) -> SpectralDensity {
        SpectralDensity::new(eta, s, wc).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SpectralDensity::new(-0.1, 1.0, 1.0).is_err());
        assert!(SpectralDensity::new(0.1, 0.0, 1.0).is_err());
        assert!(SpectralDensity::new(0.1, 1.0, 0.0).is_err());
        assert!(SpectralDensity::new(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn classification() {
        assert_eq!(sd(0.1, 0.5, 1.0).ohmicity(), Ohmicity::SubOhmic);
        assert_eq!(sd(0.1, 1.0, 1.0).ohmicity(), Ohmicity::Ohmic);
        assert_eq!(sd(0.1, 2.0, 1.0).ohmicity(), Ohmicity::SuperOhmic);
    }

    #[test]
    fn j_values() {
        let b = sd(0.05, 0.8, 10.0);
        assert_eq!(b.j(0.0).unwrap(), 0.0);
        // mpmath, 40 digits
        assert_relative_eq!(b.j(1.0).unwrap(), 0.071_703_533_206_464_153_7, max_relative = 1e-14);
        assert_relative_eq!(sd(0.1, 1.0, 10.0).j(10.0).unwrap(), libm::exp(-1.0), max_relative = 1e-15);
        assert!(b.j(-1.0).is_err());
    }

    #[test]
    fn gamma_reference_values() {
        // mpmath, 20 digits
        let cases = [
            (0.5, 1.772_453_850_905_516_027_3),
            (0.8, 1.164_229_713_725_303_373_6),
            (1.0, 1.0),
            (1.3, 0.897_470_696_306_277_188_49),
            (1.8, 0.931_383_770_980_242_698_91),
            (2.0, 1.0),
            (2.5, 1.329_340_388_179_137_020_5),
            (3.0, 2.0),
        ];
        for (x, g) in cases {
            assert_relative_eq!(gamma(x), g, max_relative = 1e-12);
        }
    }

    #[test]
    fn kernel_reference_value() {
        // η=0.2, s=1, ω_c=5, x=1; both the closed form and direct quadrature
        // in mpmath give this value.
        let mu = sd(0.2, 1.0, 5.0).memory_kernel(1.0).unwrap();
        assert_relative_eq!(mu.re, -0.177_514_792_899_408_284_02, max_relative = 1e-13);
        assert_relative_eq!(mu.im, -0.073_964_497_041_420_118_343, max_relative = 1e-13);
        assert_eq!(sd(0.0, 0.7, 3.0).memory_kernel(2.0).unwrap(), C64::new(0.0, 0.0));
        assert!(sd(0.1, 1.0, 1.0).memory_kernel(-1.0).is_err());
    }

    #[test]
    fn kernel_at_zero_is_total_weight() {
        for (eta, s, wc) in [(0.05, 0.8, 10.0), (0.2, 2.0, 5.0), (0.3, 0.5, 1.0)] {
            let b = sd(eta, s, wc);
            let mu0 = b.memory_kernel(0.0).unwrap();
            assert_eq!(mu0.im, 0.0);
            assert_relative_eq!(mu0.re, eta * wc * wc * gamma(s + 1.0), max_relative = 1e-14);
        }
    }

    #[test]
    fn lamb_shift_reference_values() {
        // mpmath principal values with the same cutoff
        assert_relative_eq!(
            sd(0.05, 0.8, 10.0).lamb_shift(1.0).unwrap(),
            -0.624_291_695_962_505_513_85,
            max_relative = 1e-10
        );
        let d = sd(0.2, 1.0, 10.0).lamb_shift(1.0).unwrap();
        assert!(d < 0.0);
        assert_relative_eq!(d, -2.293_676_351_309_526_060_3, max_relative = 1e-10);
        assert_eq!(sd(0.0, 0.8, 10.0).lamb_shift(1.0).unwrap(), 0.0);
    }

    #[test]
    fn series_shift_matches_quadrature() {
        for &(s, wc) in &[(0.5, 5.0), (0.8, 10.0), (1.0, 10.0), (1.3, 2.0), (2.0, 5.0), (2.5, 5.0)] {
            let b = sd(0.1, s, wc);
            for &e in &[1e-6, 0.3, 1.0, 4.0, 0.9 * wc, 3.0 * wc, 20.0 * wc] {
                let quad = b.principal_value(e, 2.0 * b.cutoff()).unwrap();
                let series = b.lamb_shift_series(e).unwrap();
                assert!((quad - series).abs() < 1e-10 * (1.0 + quad.abs()), "s={s} E={e}: {quad} vs {series}");
            }
        }
        assert_relative_eq!(sd(0.05, 0.8, 10.0).lamb_shift_series(1.0).unwrap(), -0.624_291_695_962_505_513_85, max_relative = 1e-12);
        assert_eq!(sd(0.1, 1.00001, 5.0).lamb_shift_series(1.0), None);
    }

    #[test]
    fn lamb_shift_domain() {
        let b = sd(0.1, 1.0, 1.0);
        assert!(b.lamb_shift(0.0).is_err());
        assert!(b.lamb_shift(-1.0).is_err());
        assert!(b.lamb_shift(1e3).is_err());
    }

    #[test]
    fn y_bar_values() {
        assert_eq!(sd(0.0, 0.8, 10.0).y_bar(-1.0).unwrap(), 1.0);
        assert_relative_eq!(
            sd(0.2, 0.8, 10.0).y_bar(-0.5).unwrap(),
            -0.912_444_911_140_354_324_73,
            max_relative = 1e-12
        );
        // ȳ(0⁻) = 1 - η ω_c Γ(s) = -1 for η = 0.2, s = 1, ω_c = 10
        let b = sd(0.2, 1.0, 10.0);
        assert_relative_eq!(OMEGA0 - b.regular_integral(0.0).unwrap(), -1.0, max_relative = 1e-11);
        assert!((b.y_bar(-1e-10).unwrap() + 1.0).abs() < 1e-7);
        assert!(b.y_bar(0.0).is_err());
        assert!(b.y_bar(0.5).is_err());
    }

    #[test]
    fn y_bar_decreasing() {
        let b = sd(0.1, 0.6, 3.0);
        assert!(b.y_bar(-0.5).unwrap() > b.y_bar(-0.1).unwrap());
    }

    #[test]
    fn existence_criterion() {
        assert!(!sd(0.05, 0.8, 10.0).bound_state_exists());
        assert!(sd(0.2, 0.8, 10.0).bound_state_exists());
        // exactly at the boundary: η ω_c Γ(1) = 1
        assert!(!sd(0.1, 1.0, 10.0).bound_state_exists());
        assert_eq!(sd(0.0, 0.8, 10.0).bound_state().unwrap(), None);
        assert_eq!(sd(0.05, 0.8, 10.0).bound_state().unwrap(), None);
    }

    #[test]
    fn bound_state_reference() {
        let b = sd(0.2, 0.8, 10.0);
        let bs = b.bound_state().unwrap().unwrap();
        // mpmath root of ȳ(E) = E and its residue
        assert_relative_eq!(bs.energy, -0.791_928_533_698_633_887_44, max_relative = 1e-11);
        assert_relative_eq!(bs.residue, 0.733_779_913_270_833_408_51, max_relative = 1e-11);
        assert!((b.y_bar(bs.energy).unwrap() - bs.energy).abs() < 1e-10);
    }

    #[test]
    fn bma_constants_values() {
        let c = sd(0.0, 0.8, 10.0).bma_constants().unwrap();
        assert_eq!((c.kappa, c.delta), (0.0, 0.0));
        let c = sd(0.05, 0.8, 10.0).bma_constants().unwrap();
        let expected = PI * 0.05 * libm::pow(10.0, 0.2) * libm::exp(-0.1);
        assert_relative_eq!(c.kappa, expected, max_relative = 1e-14);
        let c = sd(0.1, 1.0, 10.0).bma_constants().unwrap();
        assert_relative_eq!(c.kappa, 0.1 * PI * libm::exp(-0.1), max_relative = 1e-14);
    }

    #[test]
    fn threshold_formula() {
        assert_relative_eq!(threshold_eta(0.8, 10.0), 0.085_893_701_922_466_746_235, max_relative = 1e-12);
    }
}
