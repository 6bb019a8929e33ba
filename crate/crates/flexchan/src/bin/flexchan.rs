//! Benchmark CLI: run Monte Carlo sweeps from TOML configs, list the built-in
//! scenarios, or print the closed-form error curves for a config.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use flexchan::bench::{
    csv_string, parse_config, run_scenario, scenario_catalog, theory_csv_string, theory_rows,
};

#[derive(Parser)]
#[command(name = "flexchan", version, about = "Sensing-assisted channel estimation benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and emit CSV.
    Run {
        /// TOML config path. `scenario = "<name>"` selects a preset; other
        /// keys override it.
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect the built-in scenarios.
    Scenarios {
        #[command(subcommand)]
        command: ScenariosCommand,
    },
    /// Print closed-form NMSE levels and the pilot-overhead ratio for a
    /// config's operating point, per SNR.
    Theory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ScenariosCommand {
    /// List preset names and what they exercise.
    List,
}

fn load_config(path: &PathBuf) -> anyhow::Result<flexchan::bench::BenchConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn emit(out: Option<PathBuf>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, trials, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let rows = run_scenario(&cfg)?;
            emit(out, &csv_string(&rows))?;
        }
        Command::Scenarios { command: ScenariosCommand::List } => {
            for (name, description) in scenario_catalog() {
                println!("{name}\n    {description}");
            }
        }
        Command::Theory { config, out } => {
            let cfg = load_config(&config)?;
            let rows = theory_rows(&cfg)?;
            emit(out, &theory_csv_string(&rows))?;
        }
    }
    Ok(())
}
