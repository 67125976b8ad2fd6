use alloc::vec::Vec;

use super::UTrajectory;
use crate::{Error, Result};

/// Below this modulus `u̇/u` is not reported.
pub const RATE_MODULUS_FLOOR: f64 = 1e-8;

/// Time-local frequency `ϖ(t) = -Im[u̇/u]` and rate `γ(t) = -Re[u̇/u]` on the
/// interior points `t_k = k·dt`, `k = 1 … N-1` of a trajectory.
///
/// Entries where `|u_k|` falls below [`RATE_MODULUS_FLOOR`] are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub dt: f64,
    pub varpi: Vec<Option<f64>>,
    pub gamma: Vec<Option<f64>>,
}

impl RateSeries {
    pub fn len(&self) -> usize {
        self.varpi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.varpi.is_empty()
    }

    /// Time of entry `i` (the first entry sits at `dt`).
    pub fn time(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dt
    }
}

/// Central-difference rates of a sampled trajectory.
pub fn rates_from_u(traj: &UTrajectory) -> Result<RateSeries> {
    let u = traj.values();
    if u.len() < 3 {
        return Err(Error::domain("rates_from_u", "need at least three samples", u.len() as f64));
    }
    let dt = traj.dt();
    let mut varpi = Vec::with_capacity(u.len() - 2);
    let mut gamma = Vec::with_capacity(u.len() - 2);
    for w in u.windows(3) {
        if w[1].norm() < RATE_MODULUS_FLOOR {
            varpi.push(None);
            gamma.push(None);
            continue;
        }
        let ratio = (w[2] - w[0]) / (2.0 * dt) / w[1];
        varpi.push(Some(-ratio.im));
        gamma.push(Some(-ratio.re));
    }
    Ok(RateSeries { dt, varpi, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{u_bma, u_ideal, Source};
    use crate::spectral::SpectralDensity;
    use crate::C64;

    #[test]
    fn ideal_rates() {
        let dt = 1e-3;
        let r = rates_from_u(&u_ideal(5.0, dt).unwrap()).unwrap();
        assert_eq!(r.len(), 5001 - 2);
        for i in 0..r.len() {
            assert!((r.varpi[i].unwrap() - 1.0).abs() < 1e-6);
            assert!(r.gamma[i].unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn bma_rates_are_constant() {
        let sd = SpectralDensity::new(0.05, 0.8, 10.0).unwrap();
        let c = sd.bma_constants().unwrap();
        let r = rates_from_u(&u_bma(&sd, 10.0, 1e-3).unwrap()).unwrap();
        for i in 0..r.len() {
            assert!((r.gamma[i].unwrap() - c.kappa).abs() < 1e-6);
            assert!((r.varpi[i].unwrap() - 1.0 - c.delta).abs() < 1e-6);
        }
    }

    #[test]
    fn withholds_near_zeros() {
        let vals = alloc::vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.5, 0.0), C64::new(0.4, 0.0)];
        let tr = UTrajectory::from_samples(0.1, vals, Source::Oracle, None).unwrap();
        let r = rates_from_u(&tr).unwrap();
        assert_eq!(r.varpi[0], None);
        assert!(r.gamma[1].is_some());
        assert!((r.time(1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn too_short() {
        let tr = u_ideal(0.1, 0.1).unwrap();
        assert!(rates_from_u(&tr).is_err());
    }
}
