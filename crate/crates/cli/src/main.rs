use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twostage::simgen::Method;
use twostage_cli::commands::{cmd_bootstrap, cmd_diagnose, cmd_fit, cmd_fixture, cmd_simulate};
use twostage_cli::config::{load_analysis, load_simulate, AnalysisConfig};
use twostage_cli::CliResult;

/// Two-stage exposure/health regression with measurement-error correction.
#[derive(Debug, Parser)]
#[command(name = "twostage", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    no_bias_correction: bool,
    #[arg(long)]
    bootstrap_reps: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit every configured exposure model and the corrected health model.
    Fit(Common),
    /// Bootstrap standard errors only.
    Bootstrap(Common),
    /// Compatibility diagnostics for each exposure model.
    Diagnose(Common),
    /// Monte Carlo study of a simulation scenario.
    Simulate(Common),
    /// Write a synthetic monitor/subject cohort with a matching config.
    Fixture {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn analysis(c: &Common) -> CliResult<AnalysisConfig> {
    let mut cfg = load_analysis(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &c.output {
        cfg.output = o.clone();
    }
    if c.no_bias_correction {
        cfg.bootstrap.bias_correction = false;
    }
    if let Some(b) = c.bootstrap_reps {
        cfg.bootstrap.replicates = b;
    }
    if let Some(t) = cfg.threads {
        twostage::parallel::configure_threads(t);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    match cli.command {
        Command::Fit(c) => cmd_fit(&analysis(&c)?),
        Command::Bootstrap(c) => cmd_bootstrap(&analysis(&c)?),
        Command::Diagnose(c) => cmd_diagnose(&analysis(&c)?),
        Command::Simulate(c) => {
            let mut cfg = load_simulate(&c.config)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if let Some(t) = c.threads {
                cfg.threads = Some(t);
            }
            if let Some(o) = c.output {
                cfg.output = o;
            }
            if let Some(b) = c.bootstrap_reps {
                cfg.bootstrap_reps = b;
            }
            if c.no_bias_correction {
                cfg.methods.retain(|m| matches!(m, Method::None | Method::BootOnly));
            }
            if let Some(t) = cfg.threads {
                twostage::parallel::configure_threads(t);
            }
            cmd_simulate(&cfg)
        }
        Command::Fixture { output, seed } => cmd_fixture(&output, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
