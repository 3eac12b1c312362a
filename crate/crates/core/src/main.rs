use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use langevin_decay::cli::{self, Command};
use langevin_decay::Error;

#[derive(Parser)]
#[command(name = "langevin-decay", version, about = "Config-driven runs for degenerate Langevin dynamics")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the structural conditions on the model.
    Validate { config: PathBuf },
    /// Tabulate decay envelopes ξ(t).
    Rate { config: PathBuf },
    /// Record sample paths.
    Simulate { config: PathBuf },
    /// Monte Carlo variance decay.
    Decay { config: PathBuf },
    /// Grid semigroup and Fokker–Planck evolution.
    Fpsolve { config: PathBuf },
    /// Fit an envelope to decay data and audit it.
    Compare { config: PathBuf },
    /// Run whatever command the config names.
    Run { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let (expected, path) = match args.cmd {
        Cmd::Validate { config } => (Some(Command::Validate), config),
        Cmd::Rate { config } => (Some(Command::Rate), config),
        Cmd::Simulate { config } => (Some(Command::Simulate), config),
        Cmd::Decay { config } => (Some(Command::Decay), config),
        Cmd::Fpsolve { config } => (Some(Command::Fpsolve), config),
        Cmd::Compare { config } => (Some(Command::Compare), config),
        Cmd::Run { config } => (None, config),
    };
    let result = cli::load(&path).and_then(|cfg| {
        if let Some(e) = expected {
            if cfg.config.command != e {
                return Err(Error::Config {
                    path: "command".into(),
                    message: format!("config is for `{}`, not `{}`", cfg.config.command.name(), e.name()),
                });
            }
        }
        cli::run(&cfg)
    });
    match result {
        Ok(out) => {
            print!("{}", out.text);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if out.passed {
                ExitCode::from(cli::EXIT_OK as u8)
            } else {
                ExitCode::from(cli::EXIT_VALIDATION as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
