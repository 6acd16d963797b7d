#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "conflap", version, about = "Second conformal Laplacian eigenvalue: spectra, maximization, verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply to missing sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for reports, time series and checkpoints.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of maximality samples.
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generalized spectrum of the configured manifold and factor.
    Spectrum,
    /// Epsilon continuation and classification of the limit.
    Optimize {
        /// Reuse stage checkpoints already present in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Derivative, sandwich, maximality and key-inequality checks on the product example.
    Verify,
    /// Summary of the reports in the output directory.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut cfg, base) = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => (c, p.parent().map(PathBuf::from).unwrap_or_default()),
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
        },
        None => (RunConfig::default(), PathBuf::new()),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.run.out = o;
    }
    if let Some(t) = cli.trials {
        cfg.oracle.trials = t;
    }
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    eprintln!("started at unix time {now}");
    let result = match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &base),
        Command::Optimize { resume } => commands::optimize(&cfg, &base, resume),
        Command::Verify => commands::verify(&cfg),
        Command::Report => commands::report(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
