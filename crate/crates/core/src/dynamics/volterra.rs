//! Uniform-grid solver for the memory-kernel equation of `u(t)`.
//!
//! The time derivative is integrated with the trapezoidal rule and the
//! convolution with trapezoidal product integration: `u` is interpolated
//! linearly between grid points while the kernel moments over each cell are
//! integrated with a 10-point Gauss rule. Both pieces are second order. The
//! equation is linear, so the implicit trapezoidal step is solved in closed
//! form instead of by fixed-point correction.

use alloc::vec;
use alloc::vec::Vec;

use super::{check_grid, steps, Source, UTrajectory, MODULUS_SLACK};
use crate::quad::gauss10;
use crate::spectral::{SpectralDensity, OMEGA0};
use crate::{Error, Result, C64};

/// `|u|` beyond this bound marks the integration as unstable.
pub const INSTABILITY_BOUND: f64 = 1.0 + 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolterraOptions {
    /// Largest accepted change of `|u_k|` between a solve and its re-solve
    /// at half the step.
    pub tolerance: f64,
    /// How many times the step may be halved.
    pub max_refinements: u32,
}

impl Default for VolterraOptions {
    fn default() -> Self {
        VolterraOptions { tolerance: 1e-4, max_refinements: 3 }
    }
}

/// Convergence diagnostics of an accepted solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolterraReport {
    /// Step of the accepted (finest) solve.
    pub solver_dt: f64,
    /// Number of step halvings performed.
    pub refinements: u32,
    /// `max_k ||u_k(h)| - |u_k(h/2)||` of the last comparison.
    pub defect: f64,
    /// `max_k |u_k(h) - u_k(h/2)|`, the same comparison including phase.
    pub complex_defect: f64,
}

/// Solves with the default step-halving control and returns the accepted
/// trajectory on the requested grid.
pub fn solve_u_volterra(sd: &SpectralDensity, t_max: f64, dt: f64) -> Result<UTrajectory> {
    solve_u_volterra_with(sd, t_max, dt, VolterraOptions::default()).map(|(tr, _)| tr)
}

/// Solves at `dt` and at successively halved steps until two consecutive
/// solves agree to `opts.tolerance` in `|u|` on the common grid. The finer
/// solution of the accepted pair, sampled at `dt`, is returned.
pub fn solve_u_volterra_with(
    sd: &SpectralDensity,
    t_max: f64,
    dt: f64,
    opts: VolterraOptions,
) -> Result<(UTrajectory, VolterraReport)> {
    check_grid(t_max, dt)?;
    let n = steps(t_max, dt);
    let mut coarse = integrate(sd, n, dt)?;
    let mut h = dt;
    let mut stride = 1usize;
    let mut defect = f64::INFINITY;
    for refinement in 1..=opts.max_refinements.max(1) {
        h *= 0.5;
        stride *= 2;
        let fine = integrate(sd, n * stride, h)?;
        let mut d_mod = 0.0f64;
        let mut d_cplx = 0.0f64;
        for (k, c) in coarse.iter().enumerate() {
            let f = fine[2 * k];
            d_mod = d_mod.max((c.norm() - f.norm()).abs());
            d_cplx = d_cplx.max((c - f).norm());
        }
        defect = d_mod;
        if d_mod <= opts.tolerance {
            let values: Vec<C64> = (0..=n).map(|k| fine[k * stride]).collect();
            let report = VolterraReport { solver_dt: h, refinements: refinement, defect: d_mod, complex_defect: d_cplx };
            let traj = UTrajectory::new_unchecked(dt, values, Source::Volterra, Some(*sd));
            return Ok((traj, report));
        }
        coarse = fine;
    }
    Err(Error::NonConvergence { op: "solve_u_volterra", estimate: defect, tolerance: opts.tolerance })
}

/// One solve with fixed step `h` over `n` steps, without refinement.
pub fn volterra_fixed_step(sd: &SpectralDensity, t_max: f64, h: f64) -> Result<Vec<C64>> {
    check_grid(t_max, h)?;
    integrate(sd, steps(t_max, h), h)
}

// Convolution weights for I_n = B₀u_n + Σ_{k=1}^{n-1} W_k u_{n-k} + A_{n-1}u₀,
// where A_m, B_m are the moments of μ against the two hat functions on
// the cell [mh, (m+1)h].
struct Weights {
    a: Vec<C64>,
    // W_k stored reversed: rev[n_max - k] = W_k, so a dot product against
    // u[1..=n] reads a contiguous slice.
    rev_re: Vec<f64>,
    rev_im: Vec<f64>,
    b0: C64,
}

fn weights(sd: &SpectralDensity, n: usize, h: f64) -> Weights {
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for m in 0..n {
        let lo = m as f64 * h;
        let hi = lo + h;
        let am = gauss10(|x| sd.kernel_at(x) * ((x - lo) / h), lo, hi);
        let bm = gauss10(|x| sd.kernel_at(x) * ((hi - x) / h), lo, hi);
        a.push(am);
        b.push(bm);
    }
    let mut rev_re = vec![0.0; n + 1];
    let mut rev_im = vec![0.0; n + 1];
    for k in 1..n {
        let w = a[k - 1] + b[k];
        rev_re[n - k] = w.re;
        rev_im[n - k] = w.im;
    }
    let b0 = b.first().copied().unwrap_or_default();
    Weights { a, rev_re, rev_im, b0 }
}

// Steps are advanced in blocks. Before a block starts, the part of each
// convolution sum that only involves already-known samples is evaluated as
// a tiled Toeplitz product; the few remaining terms are added while the
// block is stepped.
const BLOCK: usize = 64;
const TILE: usize = 512;

fn integrate(sd: &SpectralDensity, n: usize, h: f64) -> Result<Vec<C64>> {
    let i = C64::new(0.0, 1.0);
    let mut ur = vec![0.0; n + 1];
    let mut ui = vec![0.0; n + 1];
    let mut out = Vec::with_capacity(n + 1);
    ur[0] = 1.0;
    out.push(C64::new(1.0, 0.0));
    if sd.eta() == 0.0 {
        // Decoupled mode: the free rotation is integrated exactly.
        for k in 1..=n {
            out.push(C64::from_polar(1.0, -OMEGA0 * k as f64 * h));
        }
        return Ok(out);
    }

    let w = weights(sd, n, h);
    let denom = C64::new(1.0, 0.0) + (i * OMEGA0 + w.b0) * (0.5 * h);
    let mut u_prev = C64::new(1.0, 0.0);
    let mut f_prev = -i * OMEGA0;
    let mut hist_re = [0.0f64; BLOCK];
    let mut hist_im = [0.0f64; BLOCK];

    let mut start = 0;
    while start < n {
        let len = BLOCK.min(n - start);
        history(&w, n, start, len, &ur, &ui, &mut hist_re, &mut hist_im);
        for b in 0..len {
            let step = start + b;
            // S = A_step u₀ + Σ_{k=1}^{step} W_k u_{step+1-k}; samples j ≤ start
            // are in the history term.
            let lo = start + 1;
            let (sr, si) = if step >= lo {
                let off = n - step - 1;
                dot(&w.rev_re[off + lo..off + step + 1], &w.rev_im[off + lo..off + step + 1], &ur[lo..=step], &ui[lo..=step])
            } else {
                (0.0, 0.0)
            };
            let s = w.a[step] + C64::new(sr + hist_re[b], si + hist_im[b]);
            let u_next = (u_prev + (f_prev - s) * (0.5 * h)) / denom;
            let modulus = u_next.norm();
            if !(modulus <= INSTABILITY_BOUND) {
                return Err(Error::Unstable { step: step + 1, modulus });
            }
            f_prev = -(i * OMEGA0 + w.b0) * u_next - s;
            u_prev = u_next;
            ur[step + 1] = u_next.re;
            ui[step + 1] = u_next.im;
            out.push(u_next);
        }
        start += len;
    }
    debug_assert!(out.iter().all(|u| u.norm() <= INSTABILITY_BOUND + MODULUS_SLACK));
    Ok(out)
}

// hist[b] = Σ_{j=1}^{start} W_{start+1+b-j} u_j for b < len.
#[allow(clippy::too_many_arguments)]
fn history(
    w: &Weights,
    n: usize,
    start: usize,
    len: usize,
    ur: &[f64],
    ui: &[f64],
    hist_re: &mut [f64; BLOCK],
    hist_im: &mut [f64; BLOCK],
) {
    hist_re.fill(0.0);
    hist_im.fill(0.0);
    let mut j0 = 1;
    while j0 <= start {
        let j1 = (j0 + TILE).min(start + 1);
        for b in 0..len {
            // W_{start+1+b-j} = rev[n - start - 1 - b + j]
            let off = n - start - 1 - b;
            let (r, m) = dot(&w.rev_re[off + j0..off + j1], &w.rev_im[off + j0..off + j1], &ur[j0..j1], &ui[j0..j1]);
            hist_re[b] += r;
            hist_im[b] += m;
        }
        j0 = j1;
    }
}

// Complex dot product on split storage, Σ w_j u_j, with four independent
// accumulators per component so the loop vectorizes.
fn dot(wr: &[f64], wi: &[f64], ur: &[f64], ui: &[f64]) -> (f64, f64) {
    let len = wr.len();
    let (wi, ur, ui) = (&wi[..len], &ur[..len], &ui[..len]);
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let body = len - len % 4;
    for (((a, b), x), y) in wr[..body]
        .chunks_exact(4)
        .zip(wi[..body].chunks_exact(4))
        .zip(ur[..body].chunks_exact(4))
        .zip(ui[..body].chunks_exact(4))
    {
        for l in 0..4 {
            re[l] += a[l] * x[l] - b[l] * y[l];
            im[l] += a[l] * y[l] + b[l] * x[l];
        }
    }
    let mut r = (re[0] + re[1]) + (re[2] + re[3]);
    let mut m = (im[0] + im[1]) + (im[2] + im[3]);
    for j in body..len {
        r += wr[j] * ur[j] - wi[j] * ui[j];
        m += wr[j] * ui[j] + wi[j] * ur[j];
    }
    (r, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::u_ideal;

    #[test]
    fn zero_coupling_matches_ideal() {
        let sd = SpectralDensity::new(0.0, 0.8, 10.0).unwrap();
        let tr = solve_u_volterra(&sd, 20.0, 0.01).unwrap();
        let id = u_ideal(20.0, 0.01).unwrap();
        for (a, b) in tr.values().iter().zip(id.values()) {
            assert!((a - b).norm() <= 1e-10);
        }
    }

    #[test]
    fn starts_at_one_and_contracts() {
        let sd = SpectralDensity::new(0.2, 0.8, 10.0).unwrap();
        let (tr, rep) = solve_u_volterra_with(&sd, 10.0, 0.01, VolterraOptions::default()).unwrap();
        assert_eq!(tr.values()[0], C64::new(1.0, 0.0));
        assert!(tr.max_modulus() <= 1.0 + MODULUS_SLACK);
        assert!(rep.defect <= 1e-4);
        assert_eq!(tr.len(), 1001);
    }

    #[test]
    fn dot_matches_naive() {
        let wr: Vec<f64> = (0..11).map(|k| k as f64 * 0.3 - 1.0).collect();
        let wi: Vec<f64> = (0..11).map(|k| (k as f64).sin()).collect();
        let ur: Vec<f64> = (0..11).map(|k| (k as f64 * 0.7).cos()).collect();
        let ui: Vec<f64> = (0..11).map(|k| 0.1 * k as f64).collect();
        let (r, m) = dot(&wr, &wi, &ur, &ui);
        let naive: C64 = (0..11).map(|j| C64::new(wr[j], wi[j]) * C64::new(ur[j], ui[j])).sum();
        assert!((C64::new(r, m) - naive).norm() < 1e-13);
    }

    #[test]
    fn refuses_unconverged() {
        let sd = SpectralDensity::new(0.3, 0.8, 10.0).unwrap();
        let opts = VolterraOptions { tolerance: 1e-14, max_refinements: 1 };
        assert!(matches!(
            solve_u_volterra_with(&sd, 5.0, 0.05, opts),
            Err(Error::NonConvergence { .. })
        ));
    }
}
