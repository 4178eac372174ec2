//! `neural-pde`: generate benchmark data, train and evaluate Neural-PDE
//! models, and export predictions and plots.

mod commands;
mod config;
mod image;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::KeyArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] neural_pde::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| Self::Io { context, source }
    }

    /// 2 for configuration problems, 3 for data problems, 4 for numeric
    /// divergence.
    pub fn exit_code(&self) -> u8 {
        use neural_pde::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Core(E::InvalidParameter(_) | E::Stability { .. }) => 2,
            Self::Core(E::Numeric { .. }) => 4,
            Self::Core(_) | Self::Io { .. } => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "neural-pde", version, about = "Learn PDE dynamics from mesh-grid time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// key = value configuration file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    keys: KeyArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a benchmark problem and write its series file and manifest
    Generate(Common),
    /// Train a model on a series file
    Train(Common),
    /// Score a trained model on a series file
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model file [default: <output_dir>/model.npm]
        #[arg(long)]
        model: Option<PathBuf>,
        /// Which windows to score: test, train, or all
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Predict the window following a given start column
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// First input column [default: last complete window]
        #[arg(long)]
        start: Option<usize>,
    },
    /// Chain predictions autoregressively (experimental)
    Rollout {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        start: Option<usize>,
        /// Number of steps to produce
        #[arg(long)]
        horizon: usize,
    },
    /// Write PGM/PPM heat maps and a loss-curve CSV
    Plot {
        #[command(flatten)]
        common: Common,
        /// Reference series file
        #[arg(long)]
        exact: Option<PathBuf>,
        /// Predicted series file of the same shape
        #[arg(long)]
        predicted: Option<PathBuf>,
        /// Training history CSV
        #[arg(long)]
        history: Option<PathBuf>,
        /// Variable index to draw
        #[arg(long, default_value_t = 0)]
        variable: usize,
        /// Time column of 2D fields to draw [default: last]
        #[arg(long)]
        step: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let env_seed = std::env::var(config::SEED_ENV).ok();
    let load = |c: &Common| -> Result<(config::Settings, config::ExperimentConfig), CliError> {
        let settings = config::Settings::resolve(c.config.as_deref(), &c.keys)?;
        let cfg = config::ExperimentConfig::from_settings(&settings, env_seed.as_deref())?;
        Ok((settings, cfg))
    };
    match cli.command {
        Command::Generate(c) => {
            let (s, cfg) = load(&c)?;
            commands::generate(&s, &cfg)
        }
        Command::Train(c) => {
            let (s, cfg) = load(&c)?;
            commands::train(&s, &cfg)
        }
        Command::Evaluate { common, model, split } => {
            let (_, cfg) = load(&common)?;
            commands::evaluate(&cfg, model, &split)
        }
        Command::Predict { common, model, start } => {
            let (_, cfg) = load(&common)?;
            commands::predict(&cfg, model, start)
        }
        Command::Rollout {
            common,
            model,
            start,
            horizon,
        } => {
            let (_, cfg) = load(&common)?;
            commands::rollout(&cfg, model, start, horizon)
        }
        Command::Plot {
            common,
            exact,
            predicted,
            history,
            variable,
            step,
        } => {
            let (_, cfg) = load(&common)?;
            commands::plot(&cfg, exact, predicted, history, variable, step)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
