//! Command-line driver: training, evaluation, cross-play, exploitability,
//! ablations and tree export, with every output written under a run
//! directory together with a checksummed manifest.

pub mod artifacts;
pub mod commands;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use maviper_core::config::{ConfigError, RunConfig};
use thiserror::Error;

pub use artifacts::{artifact_root, LoadedRun, RunDir, RunManifest, ARTIFACT_ROOT_VAR};

#[derive(Debug, Parser)]
#[command(name = "maviper", version, about = "Extract decision-tree policies from multi-agent experts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct ConfigArgs {
    /// Config file (`[section]` headers, `key = value` lines).
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config value, e.g. `--set train.max_depth=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreeFormat {
    Json,
    Dot,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the configured algorithm for every configured seed.
    Train(ConfigArgs),
    /// Performance ratios and feature importances of trained runs.
    Evaluate(ConfigArgs),
    /// Every team source against every opponent source.
    Crossplay(ConfigArgs),
    /// Exact best-response exploitability of trained teams.
    Exploitability(ConfigArgs),
    /// Train and compare MAVIPER, its two ablations and IVIPER.
    Ablate(ConfigArgs),
    /// Print a tree file as JSON or Graphviz DOT.
    ExportTree {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, value_enum, default_value = "dot")]
        format: TreeFormat,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read config {path}: {source}")]
    ConfigFile { path: PathBuf, source: std::io::Error },
    #[error("invalid run setup: {0}")]
    Setup(String),
    #[error("checksum of {path} does not match its manifest")]
    ManifestMismatch { path: PathBuf },
    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } | CliError::Setup(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Reads the config file and applies the overrides in order.
pub fn load_config(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::ConfigFile {
        path: args.config.clone(),
        source,
    })?;
    let mut cfg = RunConfig::parse(&text)?;
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => commands::cmd_train(&load_config(a)?, a).map(|dir| println!("{}", dir.display())),
        Command::Evaluate(a) => commands::cmd_evaluate(&load_config(a)?, a).map(|dir| println!("{}", dir.display())),
        Command::Crossplay(a) => commands::cmd_crossplay(&load_config(a)?, a).map(|dir| println!("{}", dir.display())),
        Command::Exploitability(a) => {
            commands::cmd_exploitability(&load_config(a)?, a).map(|dir| println!("{}", dir.display()))
        }
        Command::Ablate(a) => commands::cmd_ablate(&load_config(a)?, a).map(|dir| println!("{}", dir.display())),
        Command::ExportTree { tree, format } => {
            print!("{}", commands::cmd_export_tree(tree, *format)?);
            Ok(())
        }
    }
}
