mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "cellspec", version, about = "Membrane polarization spectra, effective admittivity and spectroscopic imaging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random mode, overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Closed-form tensor of a circular cell.
    Mwf,
    /// Polarization spectrum and Debye relaxation times.
    #[command(alias = "debye")]
    Spectrum,
    /// Effective admittivity (mode from [effective]).
    Effective,
    /// Synthetic boundary data of the imaging scene.
    Forward,
    /// Debye time estimated from the imaging functional.
    Image,
    /// Anisotropy statistic against frequency.
    Anisotropy,
    /// Time-domain response of a bandpass pulse.
    Pulse,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = config::load(path)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = match cli.command {
        Command::Mwf => commands::mwf(&cfg),
        Command::Spectrum => commands::spectrum_cmd(&cfg),
        Command::Effective => commands::effective(&cfg, cli.seed),
        Command::Forward => commands::forward(&cfg),
        Command::Image => commands::image(&cfg),
        Command::Anisotropy => commands::anisotropy(&cfg),
        Command::Pulse => commands::pulse(&cfg),
    }?;
    let names = out.names().join(", ");
    out.write(&cli.out)?;
    eprintln!("wrote {names} to {}", cli.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
