use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{check_grid, steps, Source, UTrajectory};
use crate::spectral::{SpectralDensity, OMEGA0};
use crate::{Error, Result, C64};

/// Largest `h·ω` accepted for the internal RK4 step.
const PHASE_PER_STEP: f64 = 0.1;

/// Result of the discretized-bath integration.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub trajectory: UTrajectory,
    /// `max_t | |c|² + Σ|d_k|² - 1 |` over the output samples.
    pub norm_deviation: f64,
    pub internal_step: f64,
    /// `2π/Δω`, beyond which the discrete bath revives.
    pub recurrence_time: f64,
}

/// Evolves the single-excitation amplitudes of the mode coupled to
/// `n_modes` bath oscillators at `ω_k = (k - ½)Δω`, `Δω = omega_max/n_modes`,
/// with `g_k = √(J(ω_k)Δω)`:
///
/// `i ċ = ω₀c + Σ g_k d_k`, `i ḋ_k = ω_k d_k + g_k c`, `c(0) = 1`.
///
/// Returns `u(t) = c(t)` sampled every `dt`.
pub fn oracle_discrete_bath(sd: &SpectralDensity, n_modes: usize, omega_max: f64, t_max: f64, dt: f64) -> Result<OracleRun> {
    check_grid(t_max, dt)?;
    if n_modes == 0 {
        return Err(Error::domain("oracle_discrete_bath", "need at least one bath mode", 0.0));
    }
    if !(omega_max.is_finite() && omega_max > 0.0) {
        return Err(Error::domain("oracle_discrete_bath", "omega_max must be positive", omega_max));
    }
    let dw = omega_max / n_modes as f64;
    let recurrence_time = 2.0 * PI / dw;
    if t_max > recurrence_time {
        return Err(Error::domain("oracle_discrete_bath", "t_max exceeds the recurrence time 2π/Δω", t_max));
    }

    let omega: Vec<f64> = (0..n_modes).map(|k| (k as f64 + 0.5) * dw).collect();
    let g: Vec<f64> = omega.iter().map(|&w| libm::sqrt(sd.j_at(w) * dw)).collect();

    let n_out = steps(t_max, dt);
    let fastest = omega_max.max(OMEGA0);
    let sub = libm::ceil(dt * fastest / PHASE_PER_STEP).max(1.0) as usize;
    let h = dt / sub as f64;

    let mut sys = Amplitudes::new(&omega, &g);
    let mut values = Vec::with_capacity(n_out + 1);
    values.push(C64::new(1.0, 0.0));
    let mut norm_deviation = 0.0f64;
    for _ in 0..n_out {
        for _ in 0..sub {
            sys.rk4(h);
        }
        values.push(sys.c);
        norm_deviation = norm_deviation.max((sys.norm_sqr() - 1.0).abs());
    }
    log::debug!("discrete bath: {n_modes} modes, h = {h:.3e}, norm deviation {norm_deviation:.3e}");

    Ok(OracleRun {
        trajectory: UTrajectory::new_unchecked(dt, values, Source::Oracle, Some(*sd)),
        norm_deviation,
        internal_step: h,
        recurrence_time,
    })
}

struct Amplitudes<'a> {
    omega: &'a [f64],
    g: &'a [f64],
    c: C64,
    d: Vec<C64>,
    // Stage derivatives and the stage state.
    kc: [C64; 4],
    kd: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl<'a> Amplitudes<'a> {
    fn new(omega: &'a [f64], g: &'a [f64]) -> Self {
        let n = omega.len();
        Amplitudes {
            omega,
            g,
            c: C64::new(1.0, 0.0),
            d: vec![C64::new(0.0, 0.0); n],
            kc: [C64::new(0.0, 0.0); 4],
            kd: [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]],
            tmp: vec![C64::new(0.0, 0.0); n],
        }
    }

    fn norm_sqr(&self) -> f64 {
        self.c.norm_sqr() + self.d.iter().map(|x| x.norm_sqr()).sum::<f64>()
    }

    // Derivative of the state (c, d) written into stage `i`; multiplying by
    // -i is (re, im) → (im, -re).
    fn derivative(omega: &[f64], g: &[f64], c: C64, d: &[C64], kd: &mut [C64]) -> C64 {
        let mut coupling = C64::new(0.0, 0.0);
        for (((k, &dk), &w), &gk) in kd.iter_mut().zip(d).zip(omega).zip(g) {
            coupling += dk * gk;
            let z = dk * w + c * gk;
            *k = C64::new(z.im, -z.re);
        }
        let z = c * OMEGA0 + coupling;
        C64::new(z.im, -z.re)
    }

    fn rk4(&mut self, h: f64) {
        let (omega, g) = (self.omega, self.g);
        self.kc[0] = Self::derivative(omega, g, self.c, &self.d, &mut self.kd[0]);
        for (stage, frac) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
            let step = frac * h;
            let c = self.c + self.kc[stage - 1] * step;
            for ((t, &d), &k) in self.tmp.iter_mut().zip(&self.d).zip(&self.kd[stage - 1]) {
                *t = d + k * step;
            }
            self.kc[stage] = Self::derivative(omega, g, c, &self.tmp, &mut self.kd[stage]);
        }
        let w = h / 6.0;
        self.c += (self.kc[0] + (self.kc[1] + self.kc[2]) * 2.0 + self.kc[3]) * w;
        let [k0, k1, k2, k3] = &self.kd;
        for ((((d, a), b), c), e) in self.d.iter_mut().zip(k0).zip(k1).zip(k2).zip(k3) {
            *d += (*a + (*b + *c) * 2.0 + *e) * w;
        }
    }
}
