//! Two-mode Gaussian states in the quadrature ordering `(x_A, p_A, x_B, p_B)`
//! with `x = (a† + a)/√2`, `p = i(a† - a)/√2`, so the vacuum covariance is `I/2`.

use crate::linalg::{CMat4, Mat4, RMat4};
use crate::{Error, Result, C64};

/// Allowed deficit of the smallest symplectic eigenvalue below `1/2`.
pub const PHYSICALITY_SLACK: f64 = 1e-9;
/// Allowed asymmetry of a covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Allowed imaginary part of `det(σ + iΩ/2)`, relative to its modulus.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-10;
/// Slack on the fidelity range and on the radicands of the fidelity formula.
pub const FIDELITY_SLACK: f64 = 1e-9;

/// `Ω = ⊕₂ [[0, 1], [-1, 0]]`, with `[R_l, R_m] = iΩ_lm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticForm;

impl SymplecticForm {
    pub fn matrix() -> RMat4 {
        let mut m = RMat4::zero();
        m[(0, 1)] = 1.0;
        m[(1, 0)] = -1.0;
        m[(2, 3)] = 1.0;
        m[(3, 2)] = -1.0;
        m
    }

    /// `σ + iΩ/2`.
    pub fn shifted(cov: &RMat4) -> CMat4 {
        let omega = Self::matrix();
        Mat4::from_fn(|i, j| C64::new(cov[(i, j)], 0.5 * omega[(i, j)]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState2Mode {
    mean: [f64; 4],
    cov: RMat4,
}

impl GaussianState2Mode {
    /// Validates symmetry and the uncertainty principle `σ + iΩ/2 ≥ 0`.
    pub fn new(mean: [f64; 4], cov: RMat4) -> Result<Self> {
        if !mean.iter().chain(cov.0.iter().flatten()).all(|x| x.is_finite()) {
            return Err(Error::domain("GaussianState2Mode", "entries must be finite", f64::NAN));
        }
        let asym = cov.asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(Error::Consistency { op: "GaussianState2Mode", what: "covariance asymmetry", value: asym });
        }
        let state = GaussianState2Mode { mean, cov };
        if !state.is_physical() {
            let nu = state.symplectic_eigenvalues();
            return Err(Error::Consistency { op: "GaussianState2Mode", what: "smallest symplectic eigenvalue", value: nu[0] });
        }
        Ok(state)
    }

    pub fn zero_mean(cov: RMat4) -> Result<Self> {
        Self::new([0.0; 4], cov)
    }

    pub fn mean(&self) -> &[f64; 4] {
        &self.mean
    }

    pub fn cov(&self) -> &RMat4 {
        &self.cov
    }

    pub fn has_zero_mean(&self) -> bool {
        self.mean.iter().all(|&x| x == 0.0)
    }

    /// Symplectic eigenvalues `ν₋ ≤ ν₊` from the two-mode invariants
    /// `2ν₊² = Δ + √(Δ² - 4 det σ)` and `ν₋²ν₊² = det σ`, where
    /// `Δ = det A + det B + 2 det C`.
    pub fn symplectic_eigenvalues(&self) -> [f64; 2] {
        let (delta, det) = self.invariants();
        let disc = (delta * delta - 4.0 * det).max(0.0);
        let plus_sq = 0.5 * (delta + libm::sqrt(disc));
        if !(plus_sq > 0.0) {
            return [0.0, 0.0];
        }
        [libm::sqrt((det / plus_sq).max(0.0)), libm::sqrt(plus_sq)]
    }

    fn invariants(&self) -> (f64, f64) {
        let c = &self.cov;
        (c.block_det(0, 0) + c.block_det(1, 1) + 2.0 * c.block_det(0, 1), c.det())
    }

    /// `ν₋ ≥ 1/2` within [`PHYSICALITY_SLACK`], tested through
    /// `16 det σ ≥ 1` and `(4ν₋² - 1)(4ν₊² - 1) = 1 + 16 det σ - 4Δ ≥ 0`, which
    /// avoid the square root that makes `ν₋` ill-conditioned for pure states.
    pub fn is_physical(&self) -> bool {
        let c = &self.cov;
        if !(c[(0, 0)] > 0.0 && c[(2, 2)] > 0.0) {
            return false;
        }
        let (delta, det) = self.invariants();
        let slack = 4.0 * PHYSICALITY_SLACK;
        let product = 1.0 + 16.0 * det - 4.0 * delta;
        16.0 * det >= 1.0 - slack && product >= -slack * (1.0 + 16.0 * det + 4.0 * delta)
    }
}

/// `n̄ = 1/(e^{βω₀} - 1)`.
pub fn mean_thermal_occupation(beta: f64) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::domain("mean_thermal_occupation", "inverse temperature must be positive and finite", beta));
    }
    let n = 1.0 / libm::expm1(beta);
    if !(n > 0.0) {
        return Err(Error::domain("mean_thermal_occupation", "occupation underflows to zero", beta));
    }
    Ok(n)
}

fn block_diagonal(a: f64, b: f64) -> RMat4 {
    let mut m = RMat4::zero();
    m[(0, 0)] = a;
    m[(1, 1)] = a;
    m[(2, 2)] = b;
    m[(3, 3)] = b;
    m
}

/// Signal-idler state after both modes decohere with factor `u`: diagonal
/// blocks `(2n+1)/2` with `n = |u|² sinh²r`, correlations `sinh(2r)/2 · b`,
/// `b = [[-Re u², -Im u²], [-Im u², Re u²]]`. A modulus above one but within
/// [`MODULUS_SLACK`](crate::dynamics::MODULUS_SLACK) is rescaled to one.
pub fn signal_idler_cov(r: f64, u: C64) -> Result<GaussianState2Mode> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::domain("signal_idler_cov", "squeezing must be non-negative", r));
    }
    if !(u.norm() <= 1.0 + crate::dynamics::MODULUS_SLACK) {
        return Err(Error::domain("signal_idler_cov", "|u| exceeds one", u.norm()));
    }
    // Overshoot within the slack is solver error; |u| > 1 is never physical.
    let u = if u.norm() > 1.0 { u / u.norm() } else { u };
    let sh = libm::sinh(r);
    let n = u.norm_sqr() * sh * sh;
    let mut m = block_diagonal(n + 0.5, n + 0.5);
    let u2 = u * u;
    let c = 0.5 * libm::sinh(2.0 * r);
    let b = [[-u2.re, -u2.im], [-u2.im, u2.re]];
    for i in 0..2 {
        for j in 0..2 {
            m[(i, 2 + j)] = c * b[i][j];
            m[(2 + j, i)] = c * b[i][j];
        }
    }
    GaussianState2Mode::zero_mean(m)
}

/// Target absent: thermal signal mode at `n̄` and the idler at occupation `n_t`.
pub fn received_cov_target_absent(n_bar: f64, n_t: f64) -> Result<GaussianState2Mode> {
    if !(n_bar.is_finite() && n_bar > 0.0) {
        return Err(Error::domain("received_cov_target_absent", "thermal occupation must be positive", n_bar));
    }
    if !(n_t.is_finite() && n_t >= 0.0) {
        return Err(Error::domain("received_cov_target_absent", "idler occupation must be non-negative", n_t));
    }
    GaussianState2Mode::zero_mean(block_diagonal(n_bar + 0.5, n_t + 0.5))
}

/// Target present: `σ₁ = ξσ + (1-ξ)σ₀`.
pub fn received_cov_target_present(xi: f64, sigma: &GaussianState2Mode, sigma0: &GaussianState2Mode) -> Result<GaussianState2Mode> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::domain("received_cov_target_present", "reflectivity must lie in [0, 1]", xi));
    }
    if !sigma.has_zero_mean() || !sigma0.has_zero_mean() {
        return Err(Error::domain("received_cov_target_present", "mixing formula assumes zero means", 0.0));
    }
    GaussianState2Mode::zero_mean(sigma.cov().scale(xi) + sigma0.cov().scale(1.0 - xi))
}

fn real_part_checked(z: C64, op: &'static str) -> Result<f64> {
    if z.im.abs() > IMAGINARY_RESIDUE_TOL * z.norm().max(1.0) {
        return Err(Error::Consistency { op, what: "imaginary part of det(σ + iΩ/2)", value: z.im });
    }
    Ok(z.re)
}

fn checked_sqrt(x: f64, what: &'static str) -> Result<f64> {
    if x < -FIDELITY_SLACK || x.is_nan() {
        return Err(Error::Consistency { op: "fidelity", what, value: x });
    }
    Ok(libm::sqrt(x.max(0.0)))
}

/// Fidelity between two-mode Gaussian states,
///
/// `F = exp[-δᵀ(σ₁+σ₀)⁻¹δ/2] / (√A + √B - √((√A+√B)² - Λ))`
///
/// with `Λ = det(σ₁+σ₀)`, `A = 16 det(Ωσ₁Ωσ₀ - I/4)`,
/// `B = 16 det(σ₁+iΩ/2) det(σ₀+iΩ/2)` and `δ` the mean difference.
pub fn fidelity(state0: &GaussianState2Mode, state1: &GaussianState2Mode) -> Result<f64> {
    let (s0, s1) = (state0.cov(), state1.cov());
    let omega = SymplecticForm::matrix();
    let sum = *s0 + *s1;
    let lambda = sum.det();
    let a = 16.0 * (omega * *s1 * omega * *s0 - RMat4::identity().scale(0.25)).det();
    let b0 = real_part_checked(SymplecticForm::shifted(s0).det(), "fidelity")?;
    let b1 = real_part_checked(SymplecticForm::shifted(s1).det(), "fidelity")?;
    let b = 16.0 * b0 * b1;

    let ra = checked_sqrt(a, "A")?;
    let rb = checked_sqrt(b, "B")?;
    let outer = ra + rb;
    let inner = checked_sqrt(outer * outer - lambda, "(√A+√B)² - Λ")?;
    let denom = outer - inner;

    let d: [f64; 4] = core::array::from_fn(|i| state1.mean()[i] - state0.mean()[i]);
    let exponent = if d.iter().all(|&x| x == 0.0) {
        0.0
    } else {
        let y = sum.inverse()?.mul_vec(&d);
        0.5 * d.iter().zip(y).map(|(x, y)| x * y).sum::<f64>()
    };
    if !(denom > 0.0) {
        return Err(Error::Consistency { op: "fidelity", what: "denominator", value: denom });
    }
    let f = libm::exp(-exponent) / denom;
    if !(f >= -FIDELITY_SLACK && f <= 1.0 + FIDELITY_SLACK) {
        return Err(Error::Consistency { op: "fidelity", what: "fidelity outside [0, 1]", value: f });
    }
    Ok(f.clamp(0.0, 1.0))
}

/// `1 - F` from the same closed form, evaluated as increments from
/// `state0`. With `N = σ₁ - σ₀`, each of `A`, `B` and `Λ` is split into its
/// value at `σ₁ = σ₀` plus a determinant increment in `N`. The denominator
/// is then `1 + dD` exactly, so `1 - F` keeps its relative precision when the
/// states nearly coincide, where `1 - fidelity(..)` is lost to rounding.
pub fn infidelity(state0: &GaussianState2Mode, state1: &GaussianState2Mode) -> Result<f64> {
    let (s0, s1) = (state0.cov(), state1.cov());
    let n = *s1 - *s0;
    let omega = SymplecticForm::matrix();

    let twice = s0.scale(2.0);
    let lambda0 = twice.det();
    let d_lambda = twice.det_increment(&n);

    let m_a = omega * *s0 * omega * *s0 - RMat4::identity().scale(0.25);
    let a0 = 16.0 * m_a.det();
    let d_a = 16.0 * m_a.det_increment(&(omega * n * omega * *s0));

    let shifted0 = SymplecticForm::shifted(s0);
    let b00 = real_part_checked(shifted0.det(), "infidelity")?;
    let db1 = real_part_checked(shifted0.det_increment(&n.complexify()), "infidelity")?;
    let b0 = 16.0 * b00 * b00;
    let d_b = 16.0 * b00 * db1;

    let (ra0, rb0) = (checked_sqrt(a0, "A")?, checked_sqrt(b0, "B")?);
    let (ra, rb) = (checked_sqrt(a0 + d_a, "A")?, checked_sqrt(b0 + d_b, "B")?);
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let d_s = ratio(d_a, ra + ra0) + ratio(d_b, rb + rb0);
    let (s_0, s_1) = (ra0 + rb0, ra + rb);
    let q0 = checked_sqrt(s_0 * s_0 - lambda0, "(√A+√B)² - Λ")?;
    let q1 = checked_sqrt(s_1 * s_1 - (lambda0 + d_lambda), "(√A+√B)² - Λ")?;
    let d_q = d_s * (s_0 + s_1) - d_lambda;
    let d_denom = d_s - ratio(d_q, q0 + q1);
    let denom = 1.0 + d_denom;
    if !(denom > 0.0) {
        return Err(Error::Consistency { op: "infidelity", what: "denominator", value: denom });
    }

    let d: [f64; 4] = core::array::from_fn(|i| state1.mean()[i] - state0.mean()[i]);
    let exponent = if d.iter().all(|&x| x == 0.0) {
        0.0
    } else {
        let y = (*s0 + *s1).inverse()?.mul_vec(&d);
        0.5 * d.iter().zip(y).map(|(x, y)| x * y).sum::<f64>()
    };
    // 1 - e^{-q}/D = (dD - expm1(-q))/D
    let g = (d_denom - libm::expm1(-exponent)) / denom;
    if !(g >= -FIDELITY_SLACK && g <= 1.0 + FIDELITY_SLACK) {
        return Err(Error::Consistency { op: "infidelity", what: "1 - F outside [0, 1]", value: g });
    }
    Ok(g.clamp(0.0, 1.0))
}

/// `F⁻ = [1 - √(1-F)]/2`, the fidelity lower bound on the error probability.
pub fn fidelity_lower_bound(f: f64) -> Result<f64> {
    if !(f >= -FIDELITY_SLACK && f <= 1.0 + FIDELITY_SLACK) {
        return Err(Error::domain("fidelity_lower_bound", "fidelity must lie in [0, 1]", f));
    }
    let f = f.clamp(0.0, 1.0);
    Ok(0.5 * (1.0 - libm::sqrt(1.0 - f)))
}
