use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyql::config::{apply_overrides, load_config, parse_seeds, ConfigFile, CONFIG_ENV};
use hyql::export::{export, ExportFormat};
use hyql::runner::{simulate, RunOptions};
use hyql::{compare, Error, Result};

/// Contextual recommendation experiments: plain Q-learning against the
/// hybrid HyQL agent on a simulated cold start.
///
/// Exit status: 0 success, 2 configuration or usage error, 3 I/O error,
/// 4 malformed or incompatible data, 5 internal error.
#[derive(Debug, Parser)]
#[command(name = "hyql", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write its run directory.
    Simulate(SimulateArgs),
    /// Compare run directories window by window.
    Compare {
        /// Run directories; the first is the reference for deltas.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Write the per-window precision table of a run directory.
    Export {
        dir: PathBuf,
        /// Output format: tsv or csv.
        #[arg(long, default_value_t = ExportFormat::Tsv, value_parser = parse_format)]
        format: ExportFormat,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Configuration file or run manifest. Built-in defaults when neither this
    /// nor the environment variable is set.
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Seeds as `0..30`, `0..=29` or `1,2,5` (experiment.seeds).
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated variants: qlearning, qlearning-greedy, hyql
    /// (experiment.variants).
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
    /// Trials per run (experiment.n_trials).
    #[arg(long)]
    trials: Option<u32>,
    /// Run directory to create; must be new or empty.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; all cores by default.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Also checkpoint every run after this many trials.
    #[arg(long)]
    checkpoint_at: Option<u32>,
    /// Override any configuration key, e.g. `--set learning.p=0.8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn parse_format(s: &str) -> std::result::Result<ExportFormat, String> {
    s.parse().map_err(|e: hyql::Error| e.to_string())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let base = match &args.config {
        Some(path) => load_config(path)?,
        None => ConfigFile::default(),
    };
    let mut overrides = args.overrides.clone();
    if let Some(seeds) = &args.seeds {
        let list = parse_seeds(seeds)?;
        overrides.push(format!("experiment.seeds={list:?}"));
    }
    if let Some(variants) = &args.variants {
        overrides.push(format!("experiment.variants={variants:?}"));
    }
    if let Some(trials) = args.trials {
        overrides.push(format!("experiment.n_trials={trials}"));
    }
    let file = apply_overrides(&base, &overrides)?;
    let options = RunOptions {
        parallelism: args.parallelism,
        checkpoint_at: args.checkpoint_at,
    };
    let manifest = simulate(&file, &args.out, &options)?;
    println!("{} runs written to {}", manifest.runs, args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Compare { dirs } => {
            print!("{}", compare::compare(&dirs)?);
            Ok(())
        }
        Command::Export { dir, format, out } => {
            let text = export(&dir, format)?;
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| Error::io(&path, e)),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
