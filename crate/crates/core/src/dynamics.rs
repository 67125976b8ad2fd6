//! The decoherence factor `u(t)`, defined by
//! `u̇ + iω₀u + ∫₀ᵗ μ(t-τ) u(τ) dτ = 0` with `u(0) = 1`.

mod asymptotic;
mod oracle;
mod rates;
mod volterra;

use alloc::vec::Vec;
use core::fmt;

pub use asymptotic::{u_asymptotic, BranchCut, BRANCH_CUT_EXTENT};
pub use oracle::{oracle_discrete_bath, OracleRun};
pub use rates::{rates_from_u, RateSeries, RATE_MODULUS_FLOOR};
pub use volterra::{solve_u_volterra, solve_u_volterra_with, volterra_fixed_step, VolterraOptions, VolterraReport};

use crate::spectral::{SpectralDensity, OMEGA0};
use crate::{Error, Result, C64};

/// Allowed overshoot of `|u|` above one.
pub const MODULUS_SLACK: f64 = 1e-6;

/// Which computation produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Ideal,
    Bma,
    Volterra,
    Asymptotic,
    Oracle,
}

impl Source {
    pub const ALL: [Source; 5] = [Source::Ideal, Source::Bma, Source::Volterra, Source::Asymptotic, Source::Oracle];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Ideal => "ideal",
            Source::Bma => "bma",
            Source::Volterra => "volterra",
            Source::Asymptotic => "asymptotic",
            Source::Oracle => "oracle",
        }
    }

    pub fn parse(name: &str) -> Option<Source> {
        Source::ALL.into_iter().find(|s| s.as_str() == name)
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `u(t)` sampled at `t_k = k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct UTrajectory {
    dt: f64,
    values: Vec<C64>,
    source: Source,
    params: Option<SpectralDensity>,
}

impl UTrajectory {
    /// Wraps externally produced samples, checking `u(0) = 1` and the
    /// contraction bound (both within [`MODULUS_SLACK`]).
    pub fn from_samples(dt: f64, values: Vec<C64>, source: Source, params: Option<SpectralDensity>) -> Result<Self> {
        check_grid(dt, dt)?;
        let first = values.first().ok_or(Error::domain("UTrajectory", "no samples", 0.0))?;
        if !((*first - C64::new(1.0, 0.0)).norm() <= MODULUS_SLACK) {
            return Err(Error::Consistency { op: "UTrajectory", what: "|u(0) - 1|", value: (*first - 1.0).norm() });
        }
        if let Some((k, u)) = values.iter().enumerate().find(|(_, u)| !(u.norm() <= 1.0 + MODULUS_SLACK)) {
            return Err(Error::Unstable { step: k, modulus: u.norm() });
        }
        Ok(UTrajectory { dt, values, source, params })
    }

    pub(crate) fn new_unchecked(dt: f64, values: Vec<C64>, source: Source, params: Option<SpectralDensity>) -> Self {
        UTrajectory { dt, values, source, params }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn params(&self) -> Option<&SpectralDensity> {
        self.params.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.values.len().saturating_sub(1))
    }

    pub fn last(&self) -> C64 {
        *self.values.last().expect("trajectories are never empty")
    }

    /// Sample closest to time `t`.
    pub fn at(&self, t: f64) -> C64 {
        let k = libm::round(t / self.dt).max(0.0) as usize;
        self.values[k.min(self.values.len() - 1)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, C64)> + '_ {
        self.values.iter().enumerate().map(move |(k, &u)| (k as f64 * self.dt, u))
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|u| u.norm()).fold(0.0, f64::max)
    }
}

/// Number of steps of the grid `0, dt, …` reaching `t_max`.
pub(crate) fn steps(t_max: f64, dt: f64) -> usize {
    libm::ceil(t_max / dt - 1e-9).max(1.0) as usize
}

pub(crate) fn check_grid(t_max: f64, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::domain("time grid", "dt must be positive", dt));
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::domain("time grid", "t_max must be positive", t_max));
    }
    Ok(())
}

/// `u(t) = e^{-iω₀t}`.
pub fn u_ideal(t_max: f64, dt: f64) -> Result<UTrajectory> {
    check_grid(t_max, dt)?;
    let n = steps(t_max, dt);
    let values = (0..=n).map(|k| C64::from_polar(1.0, -OMEGA0 * (k as f64 * dt))).collect();
    Ok(UTrajectory::new_unchecked(dt, values, Source::Ideal, None))
}

/// Born-Markov trajectory `u(t) = exp{-κt - i[ω₀ + Δ(ω₀)]t}`.
pub fn u_bma(sd: &SpectralDensity, t_max: f64, dt: f64) -> Result<UTrajectory> {
    check_grid(t_max, dt)?;
    let c = sd.bma_constants()?;
    let n = steps(t_max, dt);
    let values = (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            C64::from_polar(libm::exp(-c.kappa * t), -(OMEGA0 + c.delta) * t)
        })
        .collect();
    Ok(UTrajectory::new_unchecked(dt, values, Source::Bma, Some(*sd)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn ideal_quarter_periods() {
        let tr = u_ideal(2.0 * PI, PI / 2.0).unwrap();
        let expected = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0), C64::new(1.0, 0.0)];
        assert_eq!(tr.len(), 5);
        for (u, e) in tr.values().iter().zip(expected) {
            assert!((u - e).norm() < 1e-15);
        }
        assert_eq!(tr.values()[0], C64::new(1.0, 0.0));
        assert!((tr.at(PI) + 1.0).norm() < 1e-15);
        assert!(tr.values().iter().all(|u| (u.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn bma_zero_coupling_is_ideal() {
        let sd = SpectralDensity::new(0.0, 0.8, 10.0).unwrap();
        let a = u_bma(&sd, 10.0, 0.1).unwrap();
        let b = u_ideal(10.0, 0.1).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn bma_decay() {
        let sd = SpectralDensity::new(0.05, 0.8, 10.0).unwrap();
        let kappa = sd.bma_constants().unwrap().kappa;
        let tr = u_bma(&sd, 20.0, 0.01).unwrap();
        assert_eq!(tr.values()[0], C64::new(1.0, 0.0));
        assert!(tr.values().windows(2).all(|w| w[1].norm() < w[0].norm()));
        let at = u_bma(&sd, 1.0 / kappa, 1.0 / kappa).unwrap();
        assert!((at.last().norm() - libm::exp(-1.0)).abs() < 1e-14);
    }

    #[test]
    fn grid_validation() {
        assert!(u_ideal(0.0, 0.1).is_err());
        assert!(u_ideal(1.0, -0.1).is_err());
        assert!(UTrajectory::from_samples(0.1, alloc::vec![C64::new(0.5, 0.0)], Source::Ideal, None).is_err());
        assert!(UTrajectory::from_samples(0.1, alloc::vec![C64::new(1.0, 0.0), C64::new(1.1, 0.0)], Source::Ideal, None).is_err());
    }

    #[test]
    fn source_names_roundtrip() {
        for s in Source::ALL {
            assert_eq!(Source::parse(s.as_str()), Some(s));
        }
        assert_eq!(Source::parse("nope"), None);
    }
}
