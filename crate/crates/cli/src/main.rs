use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vbsde_cli::commands::EXIT_CONFIG;
use vbsde_cli::{run, Command, CONFIG_DIR_ENV};

#[derive(Parser)]
#[command(
    name = "vbsde",
    version,
    about = "Probabilistic solver for 2D vorticity on the torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Deterministic spectral reference trajectory.
    Oracle { config: Option<PathBuf> },
    /// Picard iteration of the BSDE, with diagnostics.
    Solve { config: Option<PathBuf> },
    /// Solution bundle against an oracle trajectory along fresh paths.
    Compare { config: Option<PathBuf> },
    /// Estimate checks and pathwise residuals of a solution bundle.
    Diagnose { config: Option<PathBuf> },
}

fn config_path(command: Command, given: Option<PathBuf>) -> Option<PathBuf> {
    let dir = std::env::var_os(CONFIG_DIR_ENV).map(PathBuf::from);
    match (given, dir) {
        (Some(p), Some(dir)) if p.is_relative() && !p.exists() => Some(dir.join(p)),
        (Some(p), _) => Some(p),
        (None, Some(dir)) => Some(dir.join(format!("{}.cfg", command.name()))),
        (None, None) => None,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, given) = match cli.command {
        Sub::Oracle { config } => (Command::Oracle, config),
        Sub::Solve { config } => (Command::Solve, config),
        Sub::Compare { config } => (Command::Compare, config),
        Sub::Diagnose { config } => (Command::Diagnose, config),
    };
    let Some(path) = config_path(command, given) else {
        eprintln!("vbsde: no config path given and {CONFIG_DIR_ENV} is not set");
        return ExitCode::from(EXIT_CONFIG as u8);
    };
    let outcome = run(command, &path);
    match &outcome.error {
        Some(e) => eprintln!("vbsde {}: {e}", command.name()),
        None => eprintln!(
            "vbsde {}: wrote {} file(s) to {}",
            command.name(),
            outcome.manifest.files.len(),
            outcome.output_dir.display()
        ),
    }
    ExitCode::from(outcome.exit_code as u8)
}
