//! Front end for the `stackcast` binary.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use stackcast::ErrorClass;

pub mod commands;
pub mod config;
mod output;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "stackcast", version, about = "Stacked ensemble forecasting for daily series")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override a config key, e.g. `--set split.test_fraction=0.25`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic series and a config template.
    GenData {
        #[arg(long)]
        days: Option<usize>,
    },
    /// Fit the configured model and save it.
    Train,
    /// Predict with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Test-set metrics, optionally over several seeds.
    Evaluate {
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
    /// Hyperparameter search.
    Tune,
    /// Recursive feature elimination.
    Select,
    /// Feature-group ablation.
    Ablate,
    /// Shapley attributions on test rows.
    Explain {
        /// Explain a saved model instead of fitting one.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self.class {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numeric => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.class {
            ErrorClass::Config => "config error",
            ErrorClass::Data => "data error",
            ErrorClass::Numeric => "numeric error",
        };
        let msg: Vec<&str> = self.message.split_whitespace().collect();
        write!(f, "{label}: {}", msg.join(" "))
    }
}

impl From<stackcast::Error> for CliError {
    fn from(e: stackcast::Error) -> Self {
        Self {
            class: e.class(),
            message: e.to_string(),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.common.config.as_deref(), &cli.common.sets)?;
    if let Some(s) = cli.common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.common.out {
        cfg.out = o.to_string_lossy().into_owned();
    }
    if let Command::GenData { days: Some(d) } = &cli.command {
        cfg.data.synth.n_days = *d;
    }
    cfg.validate()?;
    std::fs::create_dir_all(cfg.out_dir()).map_err(stackcast::Error::from)?;
    match cli.command {
        Command::GenData { .. } => commands::gen_data(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Predict { model, input } => commands::predict(&cfg, &model, &input),
        Command::Evaluate { repeats } => commands::evaluate(&cfg, repeats),
        Command::Tune => commands::tune(&cfg),
        Command::Select => commands::select(&cfg),
        Command::Ablate => commands::ablate(&cfg),
        Command::Explain { model } => commands::explain(&cfg, model.as_deref()),
    }
    .map_err(CliError::from)
}
