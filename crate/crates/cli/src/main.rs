//! `quantfp` — scenario runner and verification suite.
//!
//! Subcommands mirror the library modules: `linfp run`, `nonlinear solve`,
//! `stable solve`, `particles run`, and `verify`. Every run reads one TOML
//! config, writes its artifacts plus a hashed manifest into `--out`, and
//! is bit-identical across re-runs except for `timing.json`.
//!
//! Exit codes: `0` success, `1` runtime or gate failure, `2` config error.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, ScenarioConfig, ScenarioKind};
use runner::RunError;

#[derive(Parser)]
#[command(name = "quantfp", version, about = "Quantile-coupled diffusion toolkit")]
struct Cli {
    /// Scenario config file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Artifact output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linear solves under a frozen feedback value.
    Linfp {
        #[command(subcommand)]
        action: LinfpAction,
    },
    /// Quantile-coupled fixed point on the diffusive solver.
    Nonlinear {
        #[command(subcommand)]
        action: NonlinearAction,
    },
    /// Quantile-coupled fixed point on the spectral stable solver.
    Stable {
        #[command(subcommand)]
        action: StableAction,
    },
    /// Interacting particle simulations.
    Particles {
        #[command(subcommand)]
        action: ParticlesAction,
    },
    /// Run the verification gate suite.
    Verify {
        /// Gate subset to run (overrides the config's `verify.subset`).
        #[arg(long, value_name = "NAME")]
        subset: Option<String>,
    },
}

#[derive(Subcommand)]
enum LinfpAction {
    /// Solve and write `path.csv`, `final.csv`, `report.json`.
    Run,
}

#[derive(Subcommand)]
enum NonlinearAction {
    /// Iterate to the fixed point and write path, curve, and report.
    Solve,
}

#[derive(Subcommand)]
enum StableAction {
    /// Iterate to the fixed point and write path, curve, and report.
    Solve,
}

#[derive(Subcommand)]
enum ParticlesAction {
    /// Simulate every configured seed and write records and snapshots.
    Run,
}

fn require_flag<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, RunError> {
    value.as_ref().ok_or_else(|| {
        RunError::Config(ConfigError::Invalid {
            field: flag.to_string(),
            reason: "required for this subcommand".to_string(),
        })
    })
}

fn load(cli: &Cli, kind: ScenarioKind) -> Result<ScenarioConfig, RunError> {
    let path = require_flag(&cli.config, "--config")?;
    let config = ScenarioConfig::load(path)?;
    config.validate(kind)?;
    Ok(config)
}

fn dispatch(cli: &Cli) -> Result<(), RunError> {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(RunError::Config(ConfigError::Invalid {
                field: "--workers".to_string(),
                reason: "must be at least 1".to_string(),
            }));
        }
        // Ignore the error from a pool that is already initialized.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }

    match &cli.command {
        Command::Linfp { action: LinfpAction::Run } => {
            let config = load(cli, ScenarioKind::Linfp)?;
            runner::run_linfp(&config, require_flag(&cli.out, "--out")?)
        }
        Command::Nonlinear { action: NonlinearAction::Solve } => {
            let config = load(cli, ScenarioKind::Nonlinear)?;
            runner::run_nonlinear(&config, require_flag(&cli.out, "--out")?)
        }
        Command::Stable { action: StableAction::Solve } => {
            let config = load(cli, ScenarioKind::Stable)?;
            runner::run_stable(&config, require_flag(&cli.out, "--out")?)
        }
        Command::Particles { action: ParticlesAction::Run } => {
            let config = load(cli, ScenarioKind::Particles)?;
            runner::run_particles(&config, require_flag(&cli.out, "--out")?)
        }
        Command::Verify { subset } => {
            let config = match &cli.config {
                Some(path) => {
                    let c = ScenarioConfig::load(path)?;
                    c.validate(ScenarioKind::Verify)?;
                    Some(c)
                }
                None => None,
            };
            runner::run_verify(config.as_ref(), subset.as_deref(), cli.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                RunError::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
