use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rosgas_cli::commands;
use rosgas_cli::config::defaults_json;
use rosgas_cli::{CliError, RunConfig};

/// Reinforced subgraph width and depth search for bot detection on
/// heterogeneous social graphs.
#[derive(Parser, Debug)]
#[command(name = "rosgas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; omitted keys take the defaults below.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides both the generator and the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides one configuration key, e.g. `train.agent.gamma=0.9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic graph (graph.jsonl) and its truth sidecar.
    Gen(Common),
    /// Train and evaluate one variant.
    Train {
        #[command(flatten)]
        common: Common,
        /// Run every fold of `split.folds` and write an aggregate.
        #[arg(long)]
        cross_validate: bool,
    },
    /// Compare variants across seeds (ablation.csv).
    Ablate(Common),
    /// Per-target layer probe of a trained policy (probe.csv).
    Probe(Common),
    /// Export target embeddings from saved checkpoints (embeddings.csv).
    ExportEmb(Common),
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    RunConfig::load(c.config.as_deref(), &c.sets, c.seed)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ROSGAS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("ROSGAS_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Other(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Gen(c) => commands::cmd_gen(&load(&c)?),
        Command::Train {
            common,
            cross_validate,
        } => commands::cmd_train(&load(&common)?, cross_validate),
        Command::Ablate(c) => commands::cmd_ablate(&load(&c)?).map(|_| ()),
        Command::Probe(c) => commands::cmd_probe(&load(&c)?).map(|_| ()),
        Command::ExportEmb(c) => commands::cmd_export_emb(&load(&c)?).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let help = format!("Configuration defaults:\n{}", defaults_json());
    let matches = Cli::command().after_long_help(help).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
