use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use qillum::config::{Layers, Preset, RunConfig};
use qillum::commands;

#[derive(Parser, Debug)]
#[command(name = "qillum", version, about = "Quantum illumination under structured-bath decoherence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $QILLUM_OUT, then output.dir, then ./out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points [default: available parallelism].
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Initial time step, overriding grid.dt
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Final time, overriding grid.t_max
    #[arg(long = "t-max", global = true)]
    t_max: Option<f64>,
    /// `section.key=value`, applied after the configuration file.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Bound-state energy and residue over a sweep of eta or s.
    Spectrum,
    /// u(t) for each regime in run.regimes.
    Utraj,
    /// F⁻(t) for each regime in run.regimes.
    Illuminate,
    /// F⁻(t) for several squeezings, ideal and Born-Markov.
    Fig1b,
    /// F⁻(t) across the eta and s panels.
    Fig2,
    /// Steady F⁻ against squeezing across the eta and s panels.
    Fig3,
}

impl Command {
    fn preset(self) -> Option<Preset> {
        match self {
            Command::Fig1b => Some(Preset::Fig1b),
            Command::Fig2 => Some(Preset::Fig2),
            Command::Fig3 => Some(Preset::Fig3),
            _ => None,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let layers = Layers { config: cli.config.clone(), overrides: cli.overrides.clone(), dt: cli.dt, t_max: cli.t_max };
    let base = match cli.command.preset() {
        Some(p) => {
            eprintln!("preset {}: {}", p.name(), p.describe());
            p.config()
        }
        None => RunConfig::default(),
    };
    let cfg = RunConfig::load(base, &layers)?;
    if cli.command.preset().is_some() {
        eprint!("{}", toml::to_string(&cfg)?);
    }

    let out = cli
        .out
        .or_else(|| std::env::var_os("QILLUM_OUT").map(PathBuf::from))
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        anyhow::ensure!(n > 0, "--workers must be positive");
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let files = pool.install(|| match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &out),
        Command::Utraj => commands::utraj(&cfg, &out),
        Command::Illuminate => commands::illuminate(&cfg, &out),
        Command::Fig1b => commands::fig1b(&cfg, &out),
        Command::Fig2 => commands::fig2(&cfg, &out),
        Command::Fig3 => commands::fig3(&cfg, &out),
    })?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
