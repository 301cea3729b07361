//! Command-line driver: configuration, run directories and the train, eval,
//! robustness, replay and selftest commands.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod selftest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 1 for invalid input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spacearm", version, about = "Dual-agent spacecraft-manipulator training and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; defaults apply to anything not given.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: under the output root).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads. Results do not depend on it; the default uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PolicySource {
    /// Training run directory holding arm.ckpt and base.ckpt.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long, requires = "base")]
    pub arm: Option<PathBuf>,
    #[arg(long, requires = "arm")]
    pub base: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train both agents and write checkpoints and per-epoch metrics.
    Train {
        #[command(flatten)]
        common: Common,
        /// Number of epochs instead of episodes·horizon/buffer.
        #[arg(long)]
        epochs: Option<u64>,
        /// Buffer size in transitions.
        #[arg(long)]
        buffer: Option<usize>,
        /// Minibatch size.
        #[arg(long)]
        minibatch: Option<usize>,
        /// Gradient iterations per update phase.
        #[arg(long)]
        update_steps: Option<usize>,
        /// Guidance strategy: tesg, none or linear-blend.
        #[arg(long)]
        guidance: Option<String>,
        /// Print the effective configuration and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Evaluate trained policies and/or the model-based expert.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policies: PolicySource,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        /// Also evaluate the RRT* + PID expert (no checkpoint needed).
        #[arg(long)]
        expert: bool,
        /// Also evaluate the expert arm plan with an uncontrolled base.
        #[arg(long)]
        free_float: bool,
        /// Use the relaxed success thresholds (0.1 m, 0.2 rad, 0.1 rad).
        #[arg(long)]
        relaxed: bool,
    },
    /// Sweep one fault scenario over a grid of magnitudes.
    Robustness {
        /// Scenario name, e.g. spin or momentum-sat.
        scenario: String,
        /// start:step:end; the configured grid when absent.
        #[arg(long)]
        grid: Option<String>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policies: PolicySource,
        /// learned, expert or free-float.
        #[arg(long, default_value = "learned")]
        controller: String,
        #[arg(long)]
        episodes: Option<usize>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// 5000 episodes per point and 5 seeds.
        #[arg(long)]
        full_scale: bool,
    },
    /// Run one episode with an extended horizon and write its full trace.
    Replay {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policies: PolicySource,
        #[arg(long, default_value = "learned")]
        controller: String,
        #[arg(long, default_value_t = 0)]
        episode: usize,
        #[arg(long, default_value_t = 100)]
        horizon: u32,
    },
    /// Run the fast invariant suite.
    Selftest {
        /// Test fixture: flip the sign of the position-penalty coefficient.
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    commands::dispatch(cli.command)
}
