//! Argument surface of the `wgap` binary and the dispatch into command
//! implementations. Exit codes: 0 success, 2 config/usage problems, 1
//! runtime failures. Chatter goes to standard error; only tables requested
//! for display go to standard out.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use wgap_core::{Error, Result};

use crate::config::RunConfig;
use crate::pipeline;

#[derive(Parser, Debug)]
#[command(
    name = "wgap",
    version,
    about = "Wavelet-domain adversarial perturbations: train, attack, defend, evaluate"
)]
pub struct Cli {
    /// Plain-text `key = value` run config; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override the run seed from the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Output directory for checkpoints, CSVs, and images [default: out].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train the attacked and the held-out classifier; write checkpoints and accuracies.
    TrainSurrogate,
    /// Train the perturbation generator against the checkpointed surrogate.
    TrainAttack,
    /// Write clean/adversarial/residual image triplets for the first test samples.
    Generate {
        /// How many test samples to export.
        #[arg(long, default_value_t = 8)]
        count: usize,
        /// Residual amplification before quantization.
        #[arg(long, default_value_t = 5.0)]
        gain: f64,
    },
    /// Score the trained generator against both classifiers under every defense.
    Evaluate,
    /// Decompose one PGM/PPM image and print its subband energy table.
    Dwt {
        /// Image file to analyze.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Wavelet name: haar or db2.
        #[arg(long, default_value = "db2")]
        wavelet: String,
        /// Decomposition depth.
        #[arg(long, default_value_t = 2)]
        levels: usize,
    },
    /// Print the stored evaluation grid as an aligned table.
    Report,
}

/// Process exit code for a failed run: config and usage problems are 2,
/// everything else is a runtime failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) => 2,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut rc = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        rc.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| rc.out_dir.clone());

    match cli.command {
        Command::TrainSurrogate => pipeline::cmd_train_surrogate(&rc, &out),
        Command::TrainAttack => pipeline::cmd_train_attack(&rc, &out),
        Command::Generate { count, gain } => pipeline::cmd_generate(&rc, &out, count, gain),
        Command::Evaluate => pipeline::cmd_evaluate(&rc, &out),
        Command::Dwt {
            input,
            wavelet,
            levels,
        } => {
            let table = pipeline::cmd_dwt(&input, &wavelet, levels)?;
            print!("{table}");
            Ok(())
        }
        Command::Report => {
            let table = pipeline::cmd_report(&out)?;
            print!("{table}");
            Ok(())
        }
    }
}
