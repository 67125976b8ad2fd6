//! The subcommands. Each computes its rows in parallel, then writes its
//! files from a single thread in sorted order, so output is independent of
//! scheduling. A `<name>_meta.json` sidecar records solver diagnostics and is
//! written even when a point fails; the command then returns an error.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use qillum_core::dynamics::{solve_u_volterra_with, u_asymptotic, u_bma, u_ideal, BranchCut, Source, UTrajectory, VolterraOptions};
use qillum_core::illumination::{f_minus_approx, resolution_series, theta_noisy, theta_steady, IlluminationParams, Method};
use qillum_core::spectral::{self, BoundState, SpectralDensity};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{RunConfig, SweepParameter};
use crate::table::{Cell, Table};

/// A trajectory with the diagnostics of the solver that produced it.
#[derive(Debug, Clone)]
pub struct Solved {
    pub trajectory: UTrajectory,
    pub diagnostics: Value,
}

pub fn solve(source: Source, sd: &SpectralDensity, t_max: f64, dt: f64) -> Result<Solved> {
    let (trajectory, diagnostics) = match source {
        Source::Ideal => (u_ideal(t_max, dt)?, json!({})),
        Source::Bma => {
            let c = sd.bma_constants()?;
            (u_bma(sd, t_max, dt)?, json!({ "kappa": c.kappa, "delta": c.delta }))
        }
        Source::Volterra => {
            let opts = VolterraOptions::default();
            let (tr, rep) = solve_u_volterra_with(sd, t_max, dt, opts)?;
            let d = json!({
                "final_dt": rep.solver_dt,
                "refinements": rep.refinements,
                "modulus_defect": rep.defect,
                "complex_defect": rep.complex_defect,
                "tolerance": opts.tolerance,
            });
            (tr, d)
        }
        Source::Asymptotic if sd.eta() == 0.0 => (u_asymptotic(sd, t_max, dt)?, json!({ "nodes": 0 })),
        Source::Asymptotic => {
            let cut = BranchCut::new(sd)?;
            let d = json!({
                "nodes": cut.nodes().len(),
                "residue": cut.residue(),
                "sum_rule_defect": (cut.sum_rule() - 1.0).abs(),
            });
            (cut.trajectory(sd, t_max, dt)?, d)
        }
        Source::Oracle => bail!("the discretized-bath oracle is not a CLI regime"),
    };
    Ok(Solved { trajectory, diagnostics })
}

/// Keeps every `stride`-th sample.
pub fn subsample(traj: &UTrajectory, stride: usize) -> Result<UTrajectory> {
    if stride == 1 {
        return Ok(traj.clone());
    }
    let values = traj.values().iter().step_by(stride).copied().collect();
    Ok(UTrajectory::from_samples(traj.dt() * stride as f64, values, traj.source(), traj.params().copied())?)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn error_json(e: &anyhow::Error) -> Value {
    json!({ "error": format!("{e:#}") })
}

/// Fails with every point error listed once the sidecar is on disk.
fn finish(files: Vec<PathBuf>, failures: Vec<String>) -> Result<Vec<PathBuf>> {
    if failures.is_empty() {
        Ok(files)
    } else {
        Err(anyhow!("{} computation(s) failed: {}", failures.len(), failures.join("; ")))
    }
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let sweep = cfg.sweep.as_ref().context("spectrum needs a [sweep] over eta or s")?;
    if sweep.parameter == SweepParameter::R {
        bail!("spectrum sweeps eta or s, not r");
    }
    let values = sorted(&sweep.values);
    let rows: Vec<Result<Option<BoundState>>> = values
        .par_iter()
        .map(|&v| {
            let mut c = cfg.clone();
            c.set(sweep.parameter, v);
            Ok(c.spectral_density()?.bound_state()?)
        })
        .collect();

    let mut table = Table::new(cfg.header_comment(), &["param", "E_b", "Z", "exists"]);
    let mut failures = Vec::new();
    let mut points = Vec::new();
    for (&v, row) in values.iter().zip(rows) {
        match row {
            Ok(b) => {
                table.push(vec![v.into(), b.map(|b| b.energy).into(), b.map(|b| b.residue).into(), b.is_some().into()]);
                points.push(json!({ "param": v, "exists": b.is_some() }));
            }
            Err(e) => {
                failures.push(format!("{}={v}: {e:#}", sweep.parameter.as_str()));
                points.push(json!({ "param": v, "error": format!("{e:#}") }));
            }
        }
    }
    let thresholds: Vec<Value> = values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            c.set(sweep.parameter, v);
            json!({ "param": v, "eta_c": spectral::threshold_eta(c.bath.s, c.bath.omega_c) })
        })
        .collect();
    let meta = json!({
        "parameter": sweep.parameter.as_str(),
        "bath": cfg.bath,
        "eta_c": thresholds,
        "tolerances": {
            "bound_state_rel_tol": spectral::BOUND_STATE_REL_TOL,
            "lamb_shift_convergence": spectral::LAMB_SHIFT_CONVERGENCE,
            "cutoff_factor": spectral::CUTOFF_FACTOR,
        },
        "points": points,
    });
    let csv = out.join("spectrum.csv");
    let sidecar = out.join("spectrum_meta.json");
    table.write(&csv)?;
    write_json(&sidecar, &meta)?;
    finish(vec![csv, sidecar], failures)
}

fn solve_sources(cfg: &RunConfig) -> Result<Vec<(Source, Result<Solved>)>> {
    let sd = cfg.spectral_density()?;
    let sources = cfg.sources()?;
    let g = cfg.grid;
    Ok(sources.par_iter().map(|&src| (src, solve(src, &sd, g.t_max, g.dt))).collect())
}

pub fn utraj(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let stride = cfg.sample_stride()?;
    let mut files = Vec::new();
    let mut failures = Vec::new();
    let mut meta = serde_json::Map::new();
    for (src, res) in solve_sources(cfg)? {
        let res = res.and_then(|s| Ok((subsample(&s.trajectory, stride)?, s.diagnostics)));
        match res {
            Ok((traj, diag)) => {
                let mut table = Table::new(cfg.header_comment(), &["t", "re_u", "im_u", "abs_u", "source"]);
                for (t, u) in traj.iter() {
                    table.push(vec![t.into(), u.re.into(), u.im.into(), u.norm().into(), src.as_str().into()]);
                }
                let path = out.join(format!("utraj_{}.csv", src.as_str()));
                table.write(&path)?;
                files.push(path);
                let mut d = diag;
                d["abs_u_final"] = json!(traj.last().norm());
                meta.insert(src.as_str().into(), d);
            }
            Err(e) => {
                failures.push(format!("{}: {e:#}", src.as_str()));
                meta.insert(src.as_str().into(), error_json(&e));
            }
        }
    }
    let sidecar = out.join("utraj_meta.json");
    write_json(&sidecar, &json!({ "bath": cfg.bath, "grid": cfg.grid, "regimes": meta }))?;
    files.push(sidecar);
    finish(files, failures)
}

pub fn illuminate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let stride = cfg.sample_stride()?;
    let p = cfg.illumination_params()?;
    let method = cfg.method()?;
    let mut table = Table::new(cfg.header_comment(), &["t", "f_minus", "method", "regime"]);
    let mut failures = Vec::new();
    let mut meta = serde_json::Map::new();
    for (src, res) in solve_sources(cfg)? {
        let res = res.and_then(|s| {
            let series = resolution_series(&p, &subsample(&s.trajectory, stride)?, method)?;
            Ok((series, s.diagnostics))
        });
        match res {
            Ok((series, diag)) => {
                for (&t, &f) in series.times.iter().zip(&series.f_minus) {
                    table.push(vec![t.into(), f.into(), method.as_str().into(), series.regime.as_str().into()]);
                }
                meta.insert(src.as_str().into(), diag);
            }
            Err(e) => {
                failures.push(format!("{}: {e:#}", src.as_str()));
                meta.insert(src.as_str().into(), error_json(&e));
            }
        }
    }
    let csv = out.join("series.csv");
    let sidecar = out.join("series_meta.json");
    table.write(&csv)?;
    write_json(&sidecar, &json!({ "bath": cfg.bath, "illumination": cfg.illumination, "regimes": meta }))?;
    finish(vec![csv, sidecar], failures)
}

pub fn fig1b(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let sd = cfg.spectral_density()?;
    let base = cfg.illumination_params()?;
    let method = cfg.method()?;
    let stride = cfg.sample_stride()?;
    let g = cfg.grid;
    let r_values = sorted(&cfg.run.r_values);
    let mut table = Table::new(cfg.header_comment(), &["t", "f_minus", "regime", "r"]);
    let mut meta = serde_json::Map::new();
    for src in [Source::Ideal, Source::Bma] {
        let solved = solve(src, &sd, g.t_max, g.dt)?;
        let traj = subsample(&solved.trajectory, stride)?;
        meta.insert(src.as_str().into(), solved.diagnostics);
        let series = r_values
            .par_iter()
            .map(|&r| Ok(resolution_series(&base.with_r(r)?, &traj, method)?))
            .collect::<Result<Vec<_>>>()?;
        for (&r, s) in r_values.iter().zip(&series) {
            for (&t, &f) in s.times.iter().zip(&s.f_minus) {
                table.push(vec![t.into(), f.into(), s.regime.as_str().into(), r.into()]);
            }
        }
    }
    let csv = out.join("fig1b.csv");
    let sidecar = out.join("fig1b_meta.json");
    table.write(&csv)?;
    write_json(&sidecar, &json!({ "regimes": meta }))?;
    Ok(vec![csv, sidecar])
}

/// One bath of a figure panel and its non-Markovian trajectory.
#[derive(Debug, Clone)]
pub struct PanelPoint {
    pub param: f64,
    pub bath: SpectralDensity,
    pub bound: Option<BoundState>,
    pub solved: Solved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    Eta,
    S,
}

impl Panel {
    pub fn baths(self, cfg: &RunConfig) -> Result<Vec<(f64, SpectralDensity)>> {
        let p = &cfg.panels;
        match self {
            Panel::Eta => sorted(&p.eta_values)
                .into_iter()
                .map(|eta| Ok((eta, SpectralDensity::new(eta, cfg.bath.s, cfg.bath.omega_c)?)))
                .collect(),
            Panel::S => sorted(&p.s_values)
                .into_iter()
                .map(|s| Ok((s, SpectralDensity::new(p.s_panel_eta, s, p.s_panel_omega_c)?)))
                .collect(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Panel::Eta => "eta",
            Panel::S => "s",
        }
    }
}

/// Solves every bath of a panel with the configured solver. Failed points
/// are returned as `(param, error)`.
pub fn solve_panel(cfg: &RunConfig, panel: Panel) -> Result<(Vec<PanelPoint>, Vec<(f64, anyhow::Error)>)> {
    let solver = cfg.solver()?;
    let g = cfg.grid;
    let results: Vec<(f64, Result<PanelPoint>)> = panel
        .baths(cfg)?
        .into_par_iter()
        .map(|(param, bath)| {
            let point = (|| {
                let bound = bath.bound_state()?;
                let solved = solve(solver, &bath, g.t_max, g.dt)?;
                Ok(PanelPoint { param, bath, bound, solved })
            })();
            (param, point)
        })
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (param, r) in results {
        match r {
            Ok(p) => ok.push(p),
            Err(e) => failed.push((param, e)),
        }
    }
    Ok((ok, failed))
}

/// The leading-order resolution predicted from the residue alone.
pub fn steady_prediction(p: &IlluminationParams, bound: Option<BoundState>) -> Result<Option<f64>> {
    bound.map(|b| Ok(f_minus_approx(p, theta_steady(p, b.residue)?)?)).transpose()
}

/// `F⁻` at the last sample of the trajectory.
pub fn steady_value(p: &IlluminationParams, traj: &UTrajectory, method: Method) -> Result<f64> {
    let u = traj.last();
    Ok(match method {
        Method::ApproxLeadingOrder => f_minus_approx(p, theta_noisy(p, u)?)?,
        Method::ExactFidelity => qillum_core::illumination::f_minus_exact(p, u)?,
    })
}

fn panel_meta(points: &[PanelPoint], failed: &[(f64, anyhow::Error)]) -> Value {
    let mut list: Vec<(f64, Value)> = points
        .iter()
        .map(|p| {
            let mut d = p.solved.diagnostics.clone();
            d["param"] = json!(p.param);
            d["Z"] = json!(p.bound.map(|b| b.residue));
            d["abs_u_final"] = json!(p.solved.trajectory.last().norm());
            (p.param, d)
        })
        .chain(failed.iter().map(|(v, e)| {
            let mut d = error_json(e);
            d["param"] = json!(v);
            (*v, d)
        }))
        .collect();
    list.sort_by(|a, b| a.0.total_cmp(&b.0));
    Value::Array(list.into_iter().map(|(_, d)| d).collect())
}

fn failure_notes(panel: Panel, failed: &[(f64, anyhow::Error)]) -> Vec<String> {
    failed.iter().map(|(v, e)| format!("{}={v}: {e:#}", panel.name())).collect()
}

pub fn fig2(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let p = cfg.illumination_params()?;
    let method = cfg.method()?;
    let stride = cfg.sample_stride()?;
    let mut files = Vec::new();
    let mut failures = Vec::new();
    let mut meta = serde_json::Map::new();
    for (panel, name) in [(Panel::Eta, "fig2b"), (Panel::S, "fig2d")] {
        let (points, failed) = solve_panel(cfg, panel)?;
        let mut table = Table::new(cfg.header_comment(), &["t", "f_minus", "param", "eq13_level"]);
        for pt in &points {
            let level = steady_prediction(&p, pt.bound)?;
            let series = resolution_series(&p, &subsample(&pt.solved.trajectory, stride)?, method)?;
            for (&t, &f) in series.times.iter().zip(&series.f_minus) {
                table.push(vec![t.into(), f.into(), pt.param.into(), Cell::from(level)]);
            }
        }
        let path = out.join(format!("{name}.csv"));
        table.write(&path)?;
        files.push(path);
        meta.insert(name.into(), panel_meta(&points, &failed));
        failures.extend(failure_notes(panel, &failed));
    }
    let sidecar = out.join("fig2_meta.json");
    write_json(&sidecar, &Value::Object(meta))?;
    files.push(sidecar);
    finish(files, failures)
}

pub fn fig3(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let base = cfg.illumination_params()?;
    let method = cfg.method()?;
    let r_values = sorted(&cfg.run.r_values);
    let mut files = Vec::new();
    let mut failures = Vec::new();
    let mut meta = serde_json::Map::new();
    for (panel, name) in [(Panel::Eta, "fig3"), (Panel::S, "fig3b")] {
        let (points, failed) = solve_panel(cfg, panel)?;
        let mut table = Table::new(cfg.header_comment(), &["param", "r", "f_minus_steady", "eq13_prediction"]);
        for pt in &points {
            for &r in &r_values {
                let p = base.with_r(r)?;
                let steady = steady_value(&p, &pt.solved.trajectory, method)?;
                table.push(vec![pt.param.into(), r.into(), steady.into(), steady_prediction(&p, pt.bound)?.into()]);
            }
        }
        let path = out.join(format!("{name}.csv"));
        table.write(&path)?;
        files.push(path);
        meta.insert(name.into(), panel_meta(&points, &failed));
        failures.extend(failure_notes(panel, &failed));
    }
    let sidecar = out.join("fig3_meta.json");
    write_json(&sidecar, &Value::Object(meta))?;
    files.push(sidecar);
    finish(files, failures)
}
