use clap::{Parser, Subcommand};
use cns1d_cli::{parse_config, run_scenario, ExitStatus, ScenarioKind};
use std::path::PathBuf;
use std::process::ExitCode;

/// Lagrangian 1D compressible Navier-Stokes with far-field vacuum.
#[derive(Parser, Debug)]
#[command(name = "cns1d", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Target {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single run with diagnostics and audit.
    Run(Target),
    /// Hypothesis report of the initial data.
    Validate(Target),
    /// Runs over a list of values of one parameter.
    Sweep(Target),
    /// Manufactured-solution convergence study.
    Mms(Target),
}

fn fail(status: ExitStatus, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(status.code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(ExitStatus::ConfigError.code());
        }
    };
    let (kind, target) = match cli.command {
        Command::Run(t) => (ScenarioKind::Run, t),
        Command::Validate(t) => (ScenarioKind::Validate, t),
        Command::Sweep(t) => (ScenarioKind::Sweep, t),
        Command::Mms(t) => (ScenarioKind::Mms, t),
    };
    let text = match std::fs::read_to_string(&target.config) {
        Ok(t) => t,
        Err(e) => {
            return fail(
                ExitStatus::ConfigError,
                format!("{}: {e}", target.config.display()),
            )
        }
    };
    let base = target
        .config
        .parent()
        .map(PathBuf::from)
        .unwrap_or_default();
    let mut cfg = match parse_config(&text, &base) {
        Ok(c) => c,
        Err(e) => {
            return fail(
                ExitStatus::ConfigError,
                format!("{}: {e}", target.config.display()),
            )
        }
    };
    if cfg.kind != kind {
        return fail(
            ExitStatus::ConfigError,
            format!(
                "scenario.kind is {:?} but the subcommand asks for {kind:?}",
                cfg.kind
            ),
        );
    }
    if let Some(out) = target.out {
        cfg.out_dir = out;
    }
    match run_scenario(&cfg) {
        Ok(status) => {
            log::info!(
                "finished with status {status:?}; outputs in {}",
                cfg.out_dir.display()
            );
            ExitCode::from(status.code())
        }
        Err(e) => fail(e.status(), e),
    }
}
