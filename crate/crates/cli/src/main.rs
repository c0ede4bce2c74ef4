//! Command-line front end for the heralded qutrit entanglement simulator.
//!
//! Every run is a pure function of the effective configuration (defaults,
//! then `--config`, then flags); randomness flows from the single seed.
//! Exit codes: 0 success, 1 domain or runtime failure, 2 usage or config
//! failure.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};

use config::{resolve, Overrides, ScanAxis};

#[derive(Debug)]
pub struct AppError {
    pub code: i32,
    pub message: String,
}

impl AppError {
    pub fn usage(message: impl Into<String>) -> Self {
        AppError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        AppError {
            code: 1,
            message: message.into(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qutrit-herald",
    version,
    about = "Simulates a heralded protocol entangling two remote qutrits via photon interference"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// No-jump amplitudes and survival probability over a time grid
    Amplitudes,
    /// Quantum-jump trajectory ensemble
    Trajectories,
    /// Four-click herald cascade: probability, fidelity, decoded register
    Cascade {
        /// Comma-separated detector names, e.g. Da_F,Db_F,Da_S,Db_S
        #[arg(long, value_delimiter = ',')]
        sequence: Option<Vec<String>>,
    },
    /// Full photon-counting distribution over the four detectors
    Outcomes,
    /// Total success probability versus the emission window
    Sweep,
    /// Fidelity versus splitter angle or coupling ratio
    FidelityScan {
        #[arg(long, value_enum)]
        axis: Option<ScanAxis>,
    },
}

fn run(cli: Cli) -> Result<(), AppError> {
    let mut effective = cli.overrides.effective()?;
    if let Command::Cascade {
        sequence: Some(names),
    } = &cli.command
    {
        effective.sequence = Some(names.clone());
    }
    let mut resolved = resolve(effective)?;
    let text = match cli.command {
        Command::Amplitudes => commands::amplitudes(&mut resolved)?,
        Command::Trajectories => commands::trajectories(&mut resolved)?,
        Command::Cascade { .. } => commands::cascade(&mut resolved)?,
        Command::Outcomes => commands::outcomes(&mut resolved)?,
        Command::Sweep => commands::sweep(&mut resolved)?,
        Command::FidelityScan { axis } => {
            let axis = axis.or(resolved.config.axis).unwrap_or(ScanAxis::Theta);
            commands::fidelity_scan(&mut resolved, axis)?
        }
    };
    output::emit(&resolved, &text)
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!("qutrit-herald: {}", error.message);
        std::process::exit(error.code);
    }
}
