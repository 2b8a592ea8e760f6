//! `moransac`: plane instance segmentation from the command line.

mod commands;
mod config;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Exit code for bad input: unreadable files, invalid config, empty clouds.
pub const EXIT_INPUT: u8 = 2;
/// Exit code for failures inside the pipeline itself.
pub const EXIT_PIPELINE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "moransac",
    version,
    about = "Plane instance segmentation of RGB-D point clouds"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized stage; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Voting network file.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Comma-separated voxel sizes in meters for evaluation.
    #[arg(long, global = true, value_delimiter = ',')]
    voxel: Option<Vec<f64>>,
    /// Skip the network: sample representatives and merge with zero votes.
    #[arg(long, global = true)]
    no_net: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment a PLY file, scene archive or RGB-D frame directory.
    Segment { input: PathBuf },
    /// Iterative single-plane RANSAC on the same inputs.
    Baseline { input: PathBuf },
    /// Train the voting network on a directory of scenes or frames.
    Train { dataset: PathBuf },
    /// Compare a labeling against ground truth over voxel sizes.
    Eval {
        /// Label file, or a directory holding `labels.txt`.
        pred: PathBuf,
        /// Scene archive, frame directory, or label file (needs `--cloud`).
        gt: PathBuf,
        /// Point positions when `gt` is a bare label file.
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Generate synthetic scenes with ground truth.
    Synth,
    /// Segment, then pick the suction target highest above the floor.
    Grasp { input: PathBuf },
}

fn run(cli: Cli) -> mo_ransac::Result<()> {
    let c = &cli.common;
    let mut config = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = c.seed {
        config.set_seed(seed);
    }
    if let Some(v) = &c.voxel {
        config.voxels = v.clone();
    }
    config.validate()?;
    std::fs::create_dir_all(&c.out).map_err(|e| mo_ransac::Error::Io {
        path: c.out.clone(),
        source: e,
    })?;
    match &cli.command {
        Command::Segment { input } => commands::segment(&config, c, input),
        Command::Baseline { input } => commands::baseline(&config, c, input),
        Command::Train { dataset } => commands::train(&config, c, dataset),
        Command::Eval { pred, gt, cloud } => commands::eval(&config, c, pred, gt, cloud.as_deref()),
        Command::Synth => commands::synth(&config, c),
        Command::Grasp { input } => commands::grasp(&config, c, input),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { EXIT_INPUT } else { EXIT_PIPELINE })
        }
    }
}
