use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{check_grid, steps, Source, UTrajectory, MODULUS_SLACK};
use crate::spectral::{BoundState, SpectralDensity, OMEGA0};
use crate::{Error, Result, C64};

/// Upper end of the branch-cut integral in units of `ω_c`.
pub const BRANCH_CUT_EXTENT: f64 = 40.0;

// Cutoff for Δ(E) when the series is unavailable; twice the band extent keeps
// the pole well inside the integration range.
const SHIFT_CUTOFF: f64 = 2.0 * BRANCH_CUT_EXTENT;

// Accepted |w(mid) - linear| · width per panel.
const PANEL_TOL: f64 = 5e-11;
const MAX_NODES: usize = 200_000;
const MIN_WIDTH: f64 = 1e-13;

// Below this |θ| the Filon factor is summed as a series; above it the
// closed form loses at most ~1e-13 to cancellation.
const SERIES_BELOW: f64 = 0.05;

/// Resync interval for the phasor recurrence in [`BranchCut::trajectory`].
const RESYNC: usize = 256;

/// The continuum weight `w(E) = J(E)/([E - ω₀ - Δ(E)]² + [πJ(E)]²)` on
/// `(0, 40ω_c]`, tabulated on an adaptive node set and integrated against
/// `e^{-iEt}` with piecewise-linear Filon quadrature.
#[derive(Debug, Clone)]
pub struct BranchCut {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // (w_j - w_{j+1})/h_j per panel.
    slopes: Vec<f64>,
    bound: Option<BoundState>,
}

impl BranchCut {
    pub fn new(sd: &SpectralDensity) -> Result<Self> {
        if sd.eta() == 0.0 {
            return Err(Error::domain("u_asymptotic", "the branch-cut weight is 0/0 at zero coupling", 0.0));
        }
        let bound = sd.bound_state()?;
        let top = BRANCH_CUT_EXTENT * sd.omega_c();
        let lambda = SHIFT_CUTOFF * sd.omega_c();
        let weight = |e: f64| -> Result<f64> {
            let j = sd.j_at(e);
            let shift = match sd.lamb_shift_series(e) {
                Some(d) => d,
                None => sd.principal_value(e, lambda)?,
            };
            let d = e - OMEGA0 - shift;
            let g = PI * j;
            Ok(j / (d * d + g * g))
        };

        let seeds = seed_nodes(sd, top)?;
        let mut nodes = Vec::with_capacity(4 * seeds.len());
        let mut weights = Vec::with_capacity(4 * seeds.len());
        nodes.push(0.0);
        weights.push(0.0);
        let mut wa = 0.0;
        let mut stack: Vec<(f64, f64)> = Vec::new();
        for pair in seeds.windows(2) {
            // Depth-first refinement of [a, b], emitting nodes left to right.
            let (a, b) = (pair[0], pair[1]);
            let wb = weight(b)?;
            stack.push((b, wb));
            let mut left = (a, wa);
            while let Some(&(r, wr)) = stack.last() {
                let (l, wl) = left;
                let m = 0.5 * (l + r);
                let width = r - l;
                if width > MIN_WIDTH * r.max(1.0) {
                    let wm = weight(m)?;
                    let defect = (wm - 0.5 * (wl + wr)).abs();
                    if defect * width > PANEL_TOL {
                        stack.push((m, wm));
                        continue;
                    }
                }
                nodes.push(r);
                weights.push(wr);
                stack.pop();
                left = (r, wr);
                if nodes.len() > MAX_NODES {
                    return Err(Error::NonConvergence { op: "u_asymptotic", estimate: nodes.len() as f64, tolerance: MAX_NODES as f64 });
                }
            }
            wa = wb;
        }
        let cut = BranchCut::from_table(nodes, weights, bound);
        log::debug!("branch cut: {} nodes, Z + ∫w = {:.12}", cut.nodes.len(), cut.sum_rule());
        Ok(cut)
    }

    fn from_table(nodes: Vec<f64>, weights: Vec<f64>, bound: Option<BoundState>) -> Self {
        let slopes = nodes
            .windows(2)
            .zip(weights.windows(2))
            .map(|(e, w)| (w[0] - w[1]) / (e[1] - e[0]))
            .collect();
        BranchCut { nodes, weights, slopes, bound }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bound_state(&self) -> Option<BoundState> {
        self.bound
    }

    /// `Z`, or zero without a bound state.
    pub fn residue(&self) -> f64 {
        self.bound.map_or(0.0, |b| b.residue)
    }

    /// `Z + ∫ w(E) dE`, which equals `u(0) = 1` when the tabulation is exact.
    pub fn sum_rule(&self) -> f64 {
        self.evaluate(0.0).re
    }

    /// `u(t) = Z e^{-iE_b t} + ∫ w(E) e^{-iEt} dE`.
    pub fn evaluate(&self, t: f64) -> C64 {
        let phasors: Vec<C64> = self.nodes.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
        self.combine(t, &phasors)
    }

    fn pole(&self, t: f64) -> C64 {
        self.bound.map_or(C64::new(0.0, 0.0), |b| C64::from_polar(b.residue, -b.energy * t))
    }

    // Filon sum given e^{-iE_j t} at every node. On a panel of width h the
    // exact integral of the linear interpolant is
    // h·[w_a p_a P(θ) + w_b p_b P̄(θ)], P(θ) = ∫₀¹ (1-x) e^{-iθx} dx, θ = ht,
    // which for |θ| away from zero simplifies to
    // (w_a - w_b)(p_a - p_b)/(h t²) + i(w_b p_b - w_a p_a)/t.
    fn combine(&self, t: f64, phasors: &[C64]) -> C64 {
        let nodes = &self.nodes;
        let w = &self.weights;
        let narrow = SERIES_BELOW / t.abs().max(f64::MIN_POSITIVE);
        let mut near = C64::new(0.0, 0.0);
        let mut slope = C64::new(0.0, 0.0);
        let mut edge = C64::new(0.0, 0.0);
        for j in 0..nodes.len() - 1 {
            let h = nodes[j + 1] - nodes[j];
            let (pa, pb) = (phasors[j], phasors[j + 1]);
            if h < narrow {
                let p = filon_series(h * t);
                near += (pa * p * w[j] + pb * p.conj() * w[j + 1]) * h;
            } else {
                slope += (pa - pb) * self.slopes[j];
                edge += pb * w[j + 1] - pa * w[j];
            }
        }
        if t == 0.0 {
            return near + self.pole(t);
        }
        near + slope / (t * t) + C64::new(-edge.im, edge.re) / t + self.pole(t)
    }

    /// Samples `u` on `0, dt, …, t_max`.
    pub fn trajectory(&self, sd: &SpectralDensity, t_max: f64, dt: f64) -> Result<UTrajectory> {
        check_grid(t_max, dt)?;
        let n = steps(t_max, dt);
        let step: Vec<C64> = self.nodes.iter().map(|&e| C64::from_polar(1.0, -e * dt)).collect();
        let mut phasors = alloc::vec![C64::new(1.0, 0.0); self.nodes.len()];
        let mut values = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = k as f64 * dt;
            if k > 0 {
                if k % RESYNC == 0 {
                    for (p, &e) in phasors.iter_mut().zip(&self.nodes) {
                        *p = C64::from_polar(1.0, -e * t);
                    }
                } else {
                    for (p, s) in phasors.iter_mut().zip(&step) {
                        *p *= s;
                    }
                }
            }
            values.push(self.combine(t, &phasors));
        }
        let start = (values[0] - 1.0).norm();
        if !(start <= MODULUS_SLACK) {
            return Err(Error::Consistency { op: "u_asymptotic", what: "|u(0) - 1|", value: start });
        }
        if let Some((k, u)) = values.iter().enumerate().find(|(_, u)| !(u.norm() <= 1.0 + MODULUS_SLACK)) {
            return Err(Error::Unstable { step: k, modulus: u.norm() });
        }
        Ok(UTrajectory::new_unchecked(dt, values, Source::Asymptotic, Some(*sd)))
    }
}

/// Residue plus branch-cut representation of `u(t)`. At zero coupling the
/// cut weight degenerates, and the exact `e^{-iω₀t}` is returned.
pub fn u_asymptotic(sd: &SpectralDensity, t_max: f64, dt: f64) -> Result<UTrajectory> {
    check_grid(t_max, dt)?;
    if sd.eta() == 0.0 {
        let ideal = super::u_ideal(t_max, dt)?;
        return Ok(UTrajectory::new_unchecked(dt, ideal.values().to_vec(), Source::Asymptotic, Some(*sd)));
    }
    BranchCut::new(sd)?.trajectory(sd, t_max, dt)
}

// ∫₀¹ (1-x) e^{-iθx} dx = Σ (-iθ)^n/(n+2)!
fn filon_series(theta: f64) -> C64 {
    // Horner in z = -iθ through n = 6; the next term is below 1e-12 θ⁷.
    let z = C64::new(0.0, -theta);
    let mut sum = C64::new(1.0 / 40320.0, 0.0);
    for n in (0..6).rev() {
        let inv_fact = 1.0 / FACT[n + 2];
        sum = sum * z + inv_fact;
    }
    sum
}

const FACT: [f64; 9] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0];

// Log-spaced nodes from the band edge to the top of the cut, with a cluster
// around the quasi-pole E ≈ ω₀ + Δ(ω₀).
fn seed_nodes(sd: &SpectralDensity, top: f64) -> Result<Vec<f64>> {
    let mut pts = Vec::new();
    let lo = 1e-10 * sd.omega_c().min(1.0);
    let count = 400;
    let ratio = libm::pow(top / lo, 1.0 / count as f64);
    let mut x = lo;
    for _ in 0..count {
        pts.push(x);
        x *= ratio;
    }
    pts.push(top);

    let c = sd.bma_constants()?;
    let centre = OMEGA0 + c.delta;
    if centre > 0.0 && centre < top {
        let width = c.kappa.max(1e-12);
        for k in -40i32..=40 {
            let offset = width * libm::sinh(k as f64 / 8.0);
            let e = centre + offset;
            if e > lo && e < top {
                pts.push(e);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    Ok(pts)
}
