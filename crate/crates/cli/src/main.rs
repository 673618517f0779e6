mod commands;
mod log;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use har_core::harness::{HarnessConfig, PipelineMode};
use serde_json::json;

use crate::log::RunLog;

#[derive(Parser)]
#[command(
    name = "har",
    version,
    about = "Activity recognition from stretch and accelerometer recordings"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for every random choice of the run; overrides `seed` in the
    /// config file. Defaults to 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// JSON-lines run log; defaults to stderr.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labeled synthetic recordings, one directory per user.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Align, filter and normalize a recording.
    Preprocess {
        /// Directory holding stretch.csv, accel.csv and optionally labels.csv.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut a recording into segments.
    Segment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract one feature vector per segment.
    Features {
        #[arg(long)]
        input: PathBuf,
        /// Segments CSV to use instead of segmenting the recording.
        #[arg(long)]
        segments: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier on labeled feature files.
    Train {
        #[arg(long, num_args = 1.., required = true)]
        features: Vec<PathBuf>,
        #[arg(long)]
        model_out: PathBuf,
        /// Metrics CSV; defaults to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Confusion matrix of a model on labeled features.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        features: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy and storage for a range of hidden-layer sizes.
    Sweep {
        #[arg(long, num_args = 1.., required = true)]
        features: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay labeled features as online feedback sessions.
    RlReplay {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Episode accuracy CSV, one row per episode per run.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Model after one session over the features in file order.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Recognize activities in a recording end to end.
    Pipeline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "infer")]
        mode: PipelineMode,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to save the updated model in rl mode.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Preprocess { .. } => "preprocess",
            Command::Segment { .. } => "segment",
            Command::Features { .. } => "features",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Sweep { .. } => "sweep",
            Command::RlReplay { .. } => "rl-replay",
            Command::Pipeline { .. } => "pipeline",
        }
    }
}

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn load_config(common: &Common) -> har_core::Result<HarnessConfig> {
    let config = match &common.config {
        Some(path) => HarnessConfig::from_file(path)?,
        None => HarnessConfig::default(),
    };
    Ok(match common.seed {
        Some(seed) => config.with_seed(seed),
        None => config,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let mut log = match RunLog::open(cli.common.log.as_deref(), name) {
        Ok(log) => log,
        Err(e) => {
            eprintln!("error: cannot open run log: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };

    let result = load_config(&cli.common).and_then(|config| {
        log.event(
            "start",
            json!({ "seed": config.seed, "config": serde_json::to_value(&config).unwrap_or_default() }),
        );
        commands::run(cli.command, &config, &mut log)
    });

    match result {
        Ok(()) => {
            log.event("done", json!({ "status": "ok" }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = if e.is_numeric() { EXIT_NUMERIC } else { EXIT_INPUT };
            log.event(
                "error",
                json!({ "message": e.to_string(), "stage": e.stage(), "exit_code": code }),
            );
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
