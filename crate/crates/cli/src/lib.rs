//! Command-line front end: reproducible fits, simulation, conditional checks,
//! prediction and summaries for generalized Eyring–Weibull life tests.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gew_core::data::DataError;
use gew_core::diagnostics::DiagnosticsError;
use gew_core::inference::InferenceError;
use gew_core::samplers::SamplerError;
use thiserror::Error;

use config::{ConfigError, RunConfig};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const DATA: i32 = 4;
    pub const SAMPLER: i32 = 5;
    pub const CHECK_FAILED: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("{0}")]
    Usage(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Config(ConfigError::Io { .. }) | CliError::Data(DataError::Io { .. }) => {
                exit::IO
            }
            CliError::Config(_) | CliError::Usage(_) => exit::USAGE,
            CliError::Format { .. } | CliError::Data(_) => exit::DATA,
            CliError::Sampler(_) | CliError::Diagnostics(_) | CliError::Inference(_) => exit::SAMPLER,
            CliError::CheckFailed(_) => exit::CHECK_FAILED,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gew", version, about = "Bayesian accelerated life testing with a generalized Eyring-Weibull model")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Gibbs sampler and write chains, summaries, DIC and reliability.
    Fit(RunArgs),
    /// Simulate a censored life-test dataset from known parameters.
    Simulate(SimulateArgs),
    /// Check log-concavity and analytic derivatives of the full conditionals.
    Check(CheckArgs),
    /// Recompute predictive reliability from stored chains.
    Predict(StoredArgs),
    /// Print posterior summaries and diagnostics of stored chains.
    Summarize(StoredArgs),
}

/// Settings shared by every subcommand. Flags override the config file.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(short, long, env = "GEW_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, env = "GEW_SEED")]
    pub seed: Option<u64>,
    /// Prior preset: GEW1, GEW2_1 .. GEW2_5, GEW3, GEW4.
    #[arg(short, long)]
    pub model: Option<String>,
    #[arg(long)]
    pub n_burn: Option<usize>,
    #[arg(long)]
    pub n_keep: Option<usize>,
    #[arg(long)]
    pub n_chains: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// ars or slice.
    #[arg(long)]
    pub sampler: Option<String>,
    /// identity, log or reciprocal.
    #[arg(long)]
    pub v_transform: Option<String>,
    /// complete, type1 or type2.
    #[arg(long)]
    pub censoring: Option<String>,
    #[arg(long)]
    pub use_temperature: Option<f64>,
    #[arg(long)]
    pub use_stress: Option<f64>,
    /// Comma-separated prediction times.
    #[arg(long)]
    pub times: Option<String>,
    /// Any config key, e.g. `--set prior.beta=gamma(2,1)`. Applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// True parameters `theta1,theta2,theta3,theta4,beta`.
    #[arg(long)]
    pub truth: String,
    /// One test group `T,S,n`; repeat for more groups.
    #[arg(long = "group", required = true)]
    pub groups: Vec<String>,
    /// Type-I censoring time.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Type-II failure count per group.
    #[arg(long)]
    pub failures: Option<usize>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of random states.
    #[arg(long, default_value_t = 100)]
    pub states: usize,
    /// Grid points per conditional for the concavity scan.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct StoredArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Directory written by `fit`.
    #[arg(long)]
    pub chains_dir: PathBuf,
    /// Write here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl RunArgs {
    /// Layers the config file, flags and `--set` pairs over `base`.
    pub fn resolve(&self, mut cfg: RunConfig) -> Result<RunConfig, CliError> {
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let mut flags: Vec<(&str, String)> = Vec::new();
        let mut flag = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k, v));
            }
        };
        flag("input", self.input.as_ref().map(|p| p.display().to_string()));
        flag("out_dir", self.out_dir.as_ref().map(|p| p.display().to_string()));
        flag("seed", self.seed.map(|s| s.to_string()));
        flag("model", self.model.clone());
        flag("n_burn", self.n_burn.map(|s| s.to_string()));
        flag("n_keep", self.n_keep.map(|s| s.to_string()));
        flag("n_chains", self.n_chains.map(|s| s.to_string()));
        flag("workers", self.workers.map(|s| s.to_string()));
        flag("sampler", self.sampler.clone());
        flag("v_transform", self.v_transform.clone());
        flag("censoring", self.censoring.clone());
        flag("use_temperature", self.use_temperature.map(|s| s.to_string()));
        flag("use_stress", self.use_stress.map(|s| s.to_string()));
        flag("times", self.times.clone());
        for (k, v) in flags {
            cfg.set(k, &v)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(a) => commands::fit(&a.resolve(RunConfig::default())?).map(|_| ()),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Check(a) => commands::check(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Summarize(a) => commands::summarize(&a),
    }
}
