//! Room-scan processing pipeline: clean, planes, segment, synth.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CleanArgs, PlanesArgs, SegmentArgs, SynthArgs};
use config::{CliError, FileConfig};

#[derive(Debug, Parser)]
#[command(name = "roomscan", version, about = "Indoor point-cloud processing pipeline")]
struct Cli {
    /// Pipeline configuration file (`key = value` lines under
    /// `[clean]`, `[planes]`, `[segment]`, `[synth]` sections).
    /// Command-line flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Remove outlier points from a cloud.
    Clean(CleanArgs),
    /// Extract planes and classify floor, ceiling, walls, and objects.
    Planes(PlanesArgs),
    /// Cross-validated point-wise classification of a labeled cloud.
    Segment(SegmentArgs),
    /// Generate a labeled synthetic room scan with ground truth.
    Synth(SynthArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::empty(),
    };
    match cli.command {
        Command::Clean(args) => commands::run_clean(args, &cfg),
        Command::Planes(args) => commands::run_planes(args, &cfg),
        Command::Segment(args) => commands::run_segment(args, &cfg),
        Command::Synth(args) => commands::run_synth(args, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
