//! `optobind` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 partial
//! convergence, 3 numerical failure.

mod commands;
mod config;
mod oracle;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Completion, Report};
use config::{ConfigError, RunConfig};

/// Default worker count when `--workers` is not given (0 = all cores).
const WORKERS_ENV: &str = "OPTOBIND_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "optobind", version, about = "Optical binding of point scatterers in a waveguide")]
struct Cli {
    /// Config file with `key = value` lines.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Built-in preset applied before the config file.
    #[arg(short, long, global = true)]
    preset: Option<String>,

    /// Override a config key, e.g. `--set zeta_re=0.1`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Write outputs into this directory instead of printing to stdout.
    #[arg(short, long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads for parallel sections (0 = all cores).
    #[arg(short, long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Field amplitudes around each particle and end intensities.
    Fields,
    /// Optical force on each particle.
    Forces,
    /// Zero-force configuration near the initial one.
    Equilibrium,
    /// Coupling matrix, eigenmodes and stability flags (JSON).
    Modes,
    /// Nonlinear time evolution.
    Evolve,
    /// Stability map over complex coupling.
    Map,
    /// Analytic-versus-numeric self-check suite.
    Oracle,
    /// List the built-in presets.
    Presets,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Fields => "fields",
            Command::Forces => "forces",
            Command::Equilibrium => "equilibrium",
            Command::Modes => "modes",
            Command::Evolve => "evolve",
            Command::Map => "map",
            Command::Oracle => "oracle",
            Command::Presets => "presets",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    if let Some(name) = &cli.preset {
        cfg.apply_text(config::preset(name)?, &format!("preset {name}"))?;
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply_text(&text, &path.display().to_string())?;
    }
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output_dir = Some(dir.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    match command {
        Command::Fields => commands::fields(cfg),
        Command::Forces => commands::forces(cfg),
        Command::Equilibrium => commands::equilibrium(cfg),
        Command::Modes => commands::modes(cfg),
        Command::Evolve => commands::evolve(cfg),
        Command::Map => commands::map(cfg),
        Command::Oracle => commands::oracle(cfg),
        Command::Presets => unreachable!("handled before dispatch"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Command::Presets = cli.command {
        for (name, text) in config::PRESETS {
            let about = text.lines().next().unwrap_or("").trim_start_matches('#').trim();
            println!("{name:<18} {about}");
        }
        return ExitCode::SUCCESS;
    }
    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    let workers = cli.workers.unwrap_or(0);
    let report = optobind::exec::with_workers(workers, || run(cli.command, &cfg));
    let report = match report {
        Ok(r) => r,
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
        Err(CliError::Numeric(e)) => {
            eprintln!("error: {} failed: {e}", cli.command.name());
            return ExitCode::from(3);
        }
    };
    if let Err(e) = output::emit(&report.artifacts, cfg.output_dir.as_deref()) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(1);
    }
    match report.completion {
        Completion::Complete => ExitCode::SUCCESS,
        Completion::Partial(msg) => {
            eprintln!("warning: {msg}");
            ExitCode::from(2)
        }
        Completion::Failed(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
