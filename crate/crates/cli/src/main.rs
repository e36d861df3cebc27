//! `ssoct`: simulate fringes, reconstruct B-scans, train and evaluate the
//! network, and benchmark it against classic k-linearization.

mod commands;
mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ssoct::Error;

use commands::{Context, Mode};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "ssoct", version, about = "Swept-source OCT simulation, reconstruction and learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; falls back to the config's `output_root`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// No progress output on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Lambda,
    Classic,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize fringe volumes, a background column and a manifest.
    Simulate,
    /// Turn FRG1 fringe frames into dB images and PGM previews.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
    },
    /// Train on a generated dataset, writing checkpoints and the loss history.
    Train {
        #[arg(long)]
        input: PathBuf,
        /// Resume from this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run the network over FRG1 fringe frames.
    Infer {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Score input, classic and network images of a dataset's test split.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Time classic reconstruction against inference on a synthetic volume.
    Bench {
        /// Untrained weights are used when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::Domain(_) => 1,
        Error::Dimension(_) | Error::Measurement(_) | Error::Format { .. } | Error::Io { .. } => 2,
        Error::Numeric(_) => 3,
    }
}

fn run(cli: Cli) -> ssoct::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_root.clone())
        .ok_or_else(|| Error::Usage("no output directory: pass --out or set output_root".into()))?;
    let ctx = Context { cfg, quiet: cli.quiet };
    let out: &Path = &out;
    match &cli.command {
        Command::Simulate => commands::simulate(&ctx, out),
        Command::Reconstruct { input, mode } => {
            let mode = match mode {
                ModeArg::Lambda => Mode::Lambda,
                ModeArg::Classic => Mode::Classic,
            };
            commands::reconstruct(&ctx, input, mode, out)
        }
        Command::Train { input, checkpoint } => commands::train_cmd(&ctx, input, checkpoint.as_deref(), out),
        Command::Infer { input, checkpoint } => commands::infer(&ctx, input, checkpoint, out),
        Command::Evaluate { input, checkpoint } => commands::evaluate(&ctx, input, checkpoint, out),
        Command::Bench { checkpoint } => commands::bench(&ctx, checkpoint.as_deref(), out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
