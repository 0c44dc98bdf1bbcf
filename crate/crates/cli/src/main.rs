mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use entrain::ContextCondition;

#[derive(Parser)]
#[command(name = "entrain", version, about = "Contextual entrainment probes and scaling fits")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Args, Debug, Default)]
pub struct GlobalArgs {
    /// TOML run configuration
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum probes per (relation, condition)
    #[arg(long, global = true)]
    pub cap: Option<usize>,
    /// Logit endpoint for every model; falls back to ENTRAIN_BACKEND_URL when no model is configured
    #[arg(long, global = true, value_name = "URL")]
    pub backend_url: Option<String>,
    /// Replay logits from a JSONL record file or an aggregate CSV
    #[arg(long, global = true, value_name = "PATH")]
    pub replay: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Machine-readable output (same as --format json)
    #[arg(long, global = true)]
    pub json: bool,
    #[arg(long, global = true, value_delimiter = ',')]
    pub conditions: Vec<ContextCondition>,
    #[arg(long, global = true, value_name = "PATH")]
    pub relations: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub vocab: Option<PathBuf>,
    /// Add a model by name (used with --backend-url or the environment URL)
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Parameter count for --model; guessed from a size suffix such as `-1.3B` otherwise
    #[arg(long, global = true)]
    pub param_count: Option<u64>,
    /// On-disk logit cache directory
    #[arg(long, global = true, value_name = "DIR")]
    pub cache: Option<PathBuf>,
    #[arg(long, global = true)]
    pub family: Option<String>,
    /// Normal instead of Student-t intervals and p-values
    #[arg(long, global = true)]
    pub normal_ci: bool,
    /// Also write SVG plots in report directories
    #[arg(long, global = true)]
    pub svg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Md,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    Cerebras,
    Pythia,
}

#[derive(Subcommand)]
enum Command {
    /// Build probe instances for each context condition
    Generate,
    /// Score probes against every configured model
    Probe {
        /// Probe JSONL from `generate`. Without it, --replay records are copied through.
        probes: Option<PathBuf>,
    },
    /// Fit power laws to records or aggregate rows
    Fit {
        /// Records JSONL or aggregate CSV
        input: Option<PathBuf>,
        /// Use a bundled aggregate table instead of a file
        #[arg(long, value_enum, conflicts_with = "input")]
        fixture: Option<Fixture>,
    },
    /// Write a full report directory with plot data and a manifest
    Report {
        input: Option<PathBuf>,
        #[arg(long, value_enum, conflicts_with = "input")]
        fixture: Option<Fixture>,
    },
    /// Re-derive the published tables from the bundled fixtures and check them
    Reproduce {
        /// Replace the bundled Cerebras-GPT table
        #[arg(long, value_name = "CSV")]
        cerebras: Option<PathBuf>,
        /// Replace the bundled Pythia table
        #[arg(long, value_name = "CSV")]
        pythia: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate => commands::generate(&cli.global),
        Command::Probe { probes } => commands::probe(&cli.global, probes.as_deref()),
        Command::Fit { input, fixture } => commands::fit(&cli.global, input.as_deref(), fixture),
        Command::Report { input, fixture } => commands::report(&cli.global, input.as_deref(), fixture),
        Command::Reproduce { cerebras, pythia } => {
            commands::reproduce(&cli.global, cerebras.as_deref(), pythia.as_deref())
        }
    };
    match result {
        Ok(code) => code,
        Err(e) if commands::is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
