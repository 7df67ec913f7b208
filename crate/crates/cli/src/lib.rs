//! Command-line front end for the dual-memory stream classifier.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::execute;
pub use config::{ExperimentConfig, Overrides};

#[derive(Debug, Parser)]
#[command(name = "dualctx", version, about = "Prequential stream classification with a dual-memory context")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured predictor over every seed and report accuracy.
    Run(RunArgs),
    /// Sweep memory size, short-term ratio and variant, with paired deltas.
    Ablate(RunArgs),
    /// Report per-instance prediction latency for each configured predictor.
    Bench(RunArgs),
    /// Check a model server against the wire protocol.
    ProtocolCheck(ProtocolCheckArgs),
    /// Serve the bundled mock model over TCP or stdio.
    MockServer(MockServerArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment configuration file (TOML).
    pub config: PathBuf,
    /// Replace the configured seed list; repeatable.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub memory_size: Option<usize>,
    #[arg(long)]
    pub short_ratio: Option<f64>,
    #[arg(long)]
    pub t_warm: Option<u64>,
    /// Endpoint for every remote predictor in the configuration.
    #[arg(long, env = config::ENDPOINT_ENV)]
    pub endpoint: Option<String>,
    /// Independent runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

impl RunArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seeds: self.seeds.clone(),
            output_dir: self.output_dir.clone(),
            window: self.window,
            memory_size: self.memory_size,
            short_ratio: self.short_ratio,
            t_warm: self.t_warm,
            endpoint: self.endpoint.clone(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProtocolCheckArgs {
    /// `tcp://host:port`, `host:port` or `stdio:<command> [args]`.
    #[arg(env = config::ENDPOINT_ENV)]
    pub endpoint: String,
    #[arg(long, default_value_t = 5000)]
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnswerKind {
    Uniform,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultKind {
    None,
    DropId,
    BadSum,
    IgnoreMaxBatch,
}

#[derive(Debug, Clone, Args)]
pub struct MockServerArgs {
    #[arg(long, default_value = "127.0.0.1:0")]
    pub listen: String,
    /// Speak the protocol on standard input and output instead of TCP.
    #[arg(long)]
    pub stdio: bool,
    #[arg(long, default_value_t = 1000)]
    pub max_context: usize,
    #[arg(long, default_value_t = 64)]
    pub max_batch: usize,
    /// Artificial delay per predict request.
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,
    #[arg(long, value_enum, default_value_t = AnswerKind::Knn)]
    pub answer: AnswerKind,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Deliberate protocol violation, for testing clients.
    #[arg(long, value_enum, default_value_t = FaultKind::None)]
    pub fault: FaultKind,
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Config = 1,
    Runtime = 2,
    Conformance = 3,
}

/// A failure tagged with the exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self { exit: Exit::Config, error: error.into() }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self { exit: Exit::Runtime, error: error.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}
