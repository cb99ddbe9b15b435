//! Command-line front end.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ExperimentConfig, DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "rod-uq",
    version,
    about = "Effective moduli of randomly perturbed slender rods"
)]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Overrides the config file and the environment default.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Overrides `mc.samples`.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Overrides `mc.seed_base`.
    #[arg(long, global = true)]
    pub seed_base: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// 1D surrogate energy of one sample.
    Solve1d { config: PathBuf },
    /// 3D reference energy of one sample.
    Solve3d { config: PathBuf },
    /// Homogenized proxy E⁰, closed form and system solve.
    Proxy { config: PathBuf },
    /// Monte Carlo ensemble (model from `mc.model`).
    Mc { config: PathBuf },
    /// L² error of E^ε against E⁰ over an ε grid.
    RateSweep { config: PathBuf },
    /// Systematic 3D–1D error over an h grid.
    HSweep { config: PathBuf },
    /// 1D ensemble shifted by the coupled 3D–1D gap.
    Multifidelity { config: PathBuf },
    /// Area, moments and torsion constant of the section.
    SectionInfo { config: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve1d { .. } => "solve1d",
            Command::Solve3d { .. } => "solve3d",
            Command::Proxy { .. } => "proxy",
            Command::Mc { .. } => "mc",
            Command::RateSweep { .. } => "rate-sweep",
            Command::HSweep { .. } => "h-sweep",
            Command::Multifidelity { .. } => "multifidelity",
            Command::SectionInfo { .. } => "section-info",
        }
    }

    fn config_path(&self) -> &PathBuf {
        match self {
            Command::Solve1d { config }
            | Command::Solve3d { config }
            | Command::Proxy { config }
            | Command::Mc { config }
            | Command::RateSweep { config }
            | Command::HSweep { config }
            | Command::Multifidelity { config }
            | Command::SectionInfo { config } => config,
        }
    }
}

/// Loads the config, applies flag overrides and runs the command on a pool
/// of `workers` threads. Returns the written files.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut cfg = ExperimentConfig::load(cli.command.config_path())?;
    if let Some(m) = cli.samples {
        cfg.mc.samples = m;
    }
    if let Some(s) = cli.seed_base {
        cfg.mc.seed_base = s;
    }
    let out = cfg.resolve_output_dir(cli.output_dir.as_deref());
    cfg.output_dir = Some(out.clone());
    if cli.workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    log::info!("{} -> {}", cli.command.name(), out.display());
    pool.install(|| dispatch(&cli.command, &cfg, out))
}

pub fn dispatch(command: &Command, cfg: &ExperimentConfig, out: PathBuf) -> Result<Vec<PathBuf>> {
    use commands::*;
    match command {
        Command::Solve1d { .. } => cmd_solve1d(cfg, out),
        Command::Solve3d { .. } => cmd_solve3d(cfg, out),
        Command::Proxy { .. } => cmd_proxy(cfg, out),
        Command::Mc { .. } => cmd_mc(cfg, out),
        Command::RateSweep { .. } => cmd_rate_sweep(cfg, out),
        Command::HSweep { .. } => cmd_h_sweep(cfg, out),
        Command::Multifidelity { .. } => cmd_multifidelity(cfg, out),
        Command::SectionInfo { .. } => cmd_section_info(cfg, out),
    }
}

/// Process exit code for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}
