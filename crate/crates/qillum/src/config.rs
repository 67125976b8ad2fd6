//! Run configuration: a TOML file layered over defaults or a named preset,
//! then `key=value` overrides. Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qillum_core::dynamics::Source;
use qillum_core::illumination::{IlluminationParams, Method};
use qillum_core::spectral::SpectralDensity;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub bath: Bath,
    pub illumination: Illumination,
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    pub run: Run,
    pub panels: Panels,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bath {
    pub eta: f64,
    pub s: f64,
    pub omega_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Illumination {
    pub r: f64,
    pub xi: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub t_max: f64,
    pub dt: f64,
    /// Spacing of written rows; a multiple of `dt`. Defaults to `dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Eta,
    S,
    R,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Eta => "eta",
            SweepParameter::S => "s",
            SweepParameter::R => "r",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Run {
    /// Trajectory sources for `utraj` and `illuminate`.
    pub regimes: Vec<String>,
    pub method: String,
    /// Squeezing values swept by `fig1b` and `fig3`.
    pub r_values: Vec<f64>,
    /// Non-Markovian solver used by `fig2` and `fig3`.
    pub solver: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Panels {
    /// Couplings of the η panel, at `bath.s` and `bath.omega_c`.
    pub eta_values: Vec<f64>,
    /// Ohmicities of the s panel, at `s_panel_eta` and `s_panel_omega_c`.
    pub s_values: Vec<f64>,
    pub s_panel_eta: f64,
    pub s_panel_omega_c: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1b,
    Fig2,
    Fig3,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1b => "fig1b",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Preset::Fig1b => "omega_c=10, eta=0.05, s=0.8, xi=1e-3, beta=1; r in {0.5, 1, 1.5}; ideal and bma",
            Preset::Fig2 => {
                "xi=1e-3, beta=2, r=1; eta panel at s=0.8, omega_c=10; s panel at eta=0.2, omega_c=5; t_max=400"
            }
            Preset::Fig3 => "as fig2, steady value at t_max=400 for r in {0, 0.5, 1, 1.5, 2}",
        }
    }

    pub fn config(self) -> RunConfig {
        let mut c = RunConfig::default();
        match self {
            Preset::Fig1b => {
                c.bath = Bath { eta: 0.05, s: 0.8, omega_c: 10.0 };
                c.illumination = Illumination { r: 1.0, xi: 1e-3, beta: 1.0 };
                c.grid.sample_dt = Some(0.5);
                c.run.r_values = vec![0.5, 1.0, 1.5];
            }
            Preset::Fig2 | Preset::Fig3 => {
                c.bath = Bath { eta: 0.2, s: 0.8, omega_c: 10.0 };
                c.illumination = Illumination { r: 1.0, xi: 1e-3, beta: 2.0 };
                c.grid.sample_dt = Some(0.5);
                c.run.r_values = vec![0.0, 0.5, 1.0, 1.5, 2.0];
            }
        }
        c
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            bath: Bath { eta: 0.05, s: 0.8, omega_c: 10.0 },
            illumination: Illumination { r: 1.0, xi: 1e-3, beta: 1.0 },
            grid: Grid { t_max: 400.0, dt: 0.005, sample_dt: None },
            sweep: None,
            run: Run {
                regimes: vec!["ideal".into(), "bma".into(), "volterra".into()],
                method: Method::ApproxLeadingOrder.as_str().into(),
                r_values: vec![0.5, 1.0, 1.5],
                solver: "volterra".into(),
            },
            panels: Panels {
                eta_values: vec![0.05, 0.1, 0.15, 0.2, 0.3],
                s_values: vec![0.5, 0.8, 1.5, 2.5, 3.0],
                s_panel_eta: 0.2,
                s_panel_omega_c: 5.0,
            },
            output: Output::default(),
        }
    }
}

/// Inputs gathered from the command line, applied in order: base, file,
/// overrides, then the dedicated grid flags.
#[derive(Debug, Clone, Default)]
pub struct Layers {
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let value: toml::Table = toml::from_str(text).context("parsing configuration")?;
        Self::from_layers(RunConfig::default(), Some(value), &Layers::default())
    }

    pub fn load(base: RunConfig, layers: &Layers) -> Result<RunConfig> {
        let file = match &layers.config {
            Some(path) => Some(read_table(path)?),
            None => None,
        };
        Self::from_layers(base, file, layers)
    }

    fn from_layers(base: RunConfig, file: Option<toml::Table>, layers: &Layers) -> Result<RunConfig> {
        let mut merged = toml::Table::try_from(&base).context("serialising base configuration")?;
        if let Some(file) = file {
            merge(&mut merged, file);
        }
        for o in &layers.overrides {
            apply_override(&mut merged, o)?;
        }
        let mut cfg: RunConfig = merged.try_into().context("invalid configuration")?;
        if let Some(dt) = layers.dt {
            cfg.grid.dt = dt;
        }
        if let Some(t) = layers.t_max {
            cfg.grid.t_max = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.spectral_density()?;
        self.illumination_params()?;
        let g = &self.grid;
        if !(g.dt > 0.0 && g.dt.is_finite() && g.t_max >= 0.0 && g.t_max.is_finite()) {
            bail!("grid needs dt > 0 and t_max >= 0, got dt={} t_max={}", g.dt, g.t_max);
        }
        self.sample_stride()?;
        self.method()?;
        self.sources()?;
        self.solver()?;
        for &r in &self.run.r_values {
            self.illumination_params()?.with_r(r).with_context(|| format!("run.r_values entry {r}"))?;
        }
        let p = &self.panels;
        for &eta in &p.eta_values {
            SpectralDensity::new(eta, self.bath.s, self.bath.omega_c).with_context(|| format!("panels.eta_values entry {eta}"))?;
        }
        for &s in &p.s_values {
            SpectralDensity::new(p.s_panel_eta, s, p.s_panel_omega_c).with_context(|| format!("panels.s_values entry {s}"))?;
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                bail!("sweep.values is empty");
            }
            for &v in &sw.values {
                let mut c = self.clone();
                c.sweep = None;
                c.set(sw.parameter, v);
                c.spectral_density().and(c.illumination_params().map(|_| ())).with_context(|| format!("sweep value {v}"))?;
            }
        }
        Ok(())
    }

    /// Sets a swept parameter in place.
    pub fn set(&mut self, p: SweepParameter, v: f64) {
        match p {
            SweepParameter::Eta => self.bath.eta = v,
            SweepParameter::S => self.bath.s = v,
            SweepParameter::R => self.illumination.r = v,
        }
    }

    pub fn spectral_density(&self) -> Result<SpectralDensity> {
        let b = &self.bath;
        SpectralDensity::new(b.eta, b.s, b.omega_c).context("bath")
    }

    pub fn illumination_params(&self) -> Result<IlluminationParams> {
        let i = &self.illumination;
        IlluminationParams::new(i.r, i.xi, i.beta).context("illumination")
    }

    pub fn method(&self) -> Result<Method> {
        Method::parse(&self.run.method).with_context(|| {
            format!("run.method {:?} is not one of approx_leading_order, exact_fidelity", self.run.method)
        })
    }

    pub fn sources(&self) -> Result<Vec<Source>> {
        let mut out = Vec::new();
        for name in &self.run.regimes {
            let src = match Source::parse(name) {
                Some(s) if s != Source::Oracle => s,
                _ => bail!("run.regimes entry {name:?} is not one of ideal, bma, volterra, asymptotic"),
            };
            if !out.contains(&src) {
                out.push(src);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn solver(&self) -> Result<Source> {
        match Source::parse(&self.run.solver) {
            Some(s @ (Source::Volterra | Source::Asymptotic)) => Ok(s),
            _ => bail!("run.solver {:?} is not one of volterra, asymptotic", self.run.solver),
        }
    }

    /// Output row stride in units of `dt`.
    pub fn sample_stride(&self) -> Result<usize> {
        let Some(sample) = self.grid.sample_dt else { return Ok(1) };
        let ratio = sample / self.grid.dt;
        let stride = ratio.round();
        if !(stride >= 1.0 && (ratio - stride).abs() <= 1e-9 * ratio) {
            bail!("grid.sample_dt={sample} is not a positive multiple of dt={}", self.grid.dt);
        }
        Ok(stride as usize)
    }

    /// Single-line description for CSV comment headers. The output
    /// directory is left out so that artifacts do not depend on where they
    /// are written.
    pub fn header_comment(&self) -> String {
        let mut stripped = self.clone();
        stripped.output = Output::default();
        serde_json::to_string(&stripped).expect("configuration is always serialisable")
    }
}

fn read_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn merge(into: &mut toml::Table, from: toml::Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => merge(dst, src),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

/// Applies `section.key=value`. The value is read as a TOML literal, and
/// as a bare string when that fails.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').with_context(|| format!("override {spec:?} is not key=value"))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override {spec:?} has an empty key");
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = keys.split_last().expect("non-empty path");
    let mut cur = table;
    for k in parents {
        let entry = cur.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("override {spec:?}: {k} is not a section"),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("[bath]\netta = 0.1\n").unwrap_err();
        assert!(format!("{err:#}").contains("etta"), "{err:#}");
        assert!(RunConfig::from_toml_str("[bogus]\nx = 1\n").is_err());
        let layers = Layers { overrides: vec!["grid.dtt=0.1".into()], ..Layers::default() };
        assert!(RunConfig::load(RunConfig::default(), &layers).is_err());
    }

    #[test]
    fn overrides_and_flags_take_precedence() {
        let layers = Layers {
            overrides: vec!["bath.eta=0.2".into(), "run.method=exact_fidelity".into(), "sweep.parameter=s".into(), "sweep.values=[0.5, 2.5]".into()],
            dt: Some(0.01),
            t_max: Some(3.0),
            ..Layers::default()
        };
        let c = RunConfig::load(RunConfig::default(), &layers).unwrap();
        assert_eq!(c.bath.eta, 0.2);
        assert_eq!(c.method().unwrap(), Method::ExactFidelity);
        assert_eq!(c.sweep.as_ref().unwrap().parameter, SweepParameter::S);
        assert_eq!((c.grid.dt, c.grid.t_max), (0.01, 3.0));
    }

    #[test]
    fn invalid_values_are_rejected() {
        for o in ["bath.eta=-1", "illumination.xi=0", "grid.dt=0", "run.solver=oracle", "run.regimes=['madeup']", "grid.sample_dt=0.0075"] {
            let layers = Layers { overrides: vec![o.into()], ..Layers::default() };
            assert!(RunConfig::load(RunConfig::default(), &layers).is_err(), "{o}");
        }
    }

    #[test]
    fn sample_stride() {
        let mut c = RunConfig::default();
        c.grid.sample_dt = Some(0.5);
        assert_eq!(c.sample_stride().unwrap(), 100);
    }
}
