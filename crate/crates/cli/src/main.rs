//! `kgr`: command-line front end for the kgreason toolkit.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 data error,
//! 3 endpoint error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "kgr", version, about = "Knowledge-graph reasoning evaluation for LLMs")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a KG snapshot and ontology and print statistics.
    Ingest(SnapshotArgs),
    /// Sample triples and write masked tail and relation prediction tasks.
    MakeTasks(MakeTasksArgs),
    /// Run every configured model and strategy over the task files.
    Run(RunArgs),
    /// Merge labels into run records and compute metrics.
    Score(ScoreArgs),
    /// Render a score file as a table or CSV.
    Report(ReportArgs),
    /// Export or import human factuality labels.
    #[command(subcommand)]
    Label(LabelCommand),
    /// Baselines for contextual path generation.
    #[command(subcommand)]
    Baseline(BaselineCommand),
}

#[derive(Args, Clone, Default)]
pub struct SnapshotArgs {
    /// Triples file.
    #[arg(long)]
    pub kg: Option<PathBuf>,
    /// Ontology file.
    #[arg(long)]
    pub ontology: Option<PathBuf>,
}

#[derive(Args)]
pub struct MakeTasksArgs {
    #[command(flatten)]
    pub snapshot: SnapshotArgs,
    /// Number of triples to sample.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Relation-extraction / path-generation records to validate and copy.
    #[arg(long)]
    pub contextual: Option<PathBuf>,
    /// Keep at most this many contextual queries per document.
    #[arg(long)]
    pub per_document: Option<usize>,
}

#[derive(Args, Clone, Default)]
pub struct RunArgs {
    /// Trials per query, overriding both configured trial counts.
    #[arg(long)]
    pub trials: Option<u32>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Serve every request from the cache; a miss is an endpoint error.
    #[arg(long)]
    pub replay: bool,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Run-record output file (default: `<output_dir>/records.jsonl`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Only run the named model.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Run-record files.
    #[arg(long, required = true, num_args = 1..)]
    pub records: Vec<PathBuf>,
    /// Label file.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Where to write the score file (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Table,
    Csv,
}

#[derive(Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum LabelCommand {
    /// Write answers and path hops still needing a label.
    Export {
        #[arg(long, required = true, num_args = 1..)]
        records: Vec<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge a filled-in label file into a label store.
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
}

#[derive(Subcommand)]
enum BaselineCommand {
    /// Graph shortest path between head and tail; no endpoint involved.
    ShortestPath {
        #[command(flatten)]
        snapshot: SnapshotArgs,
        /// Task files (default: the configured ones).
        #[arg(long, num_args = 1..)]
        tasks: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Context plus a bare instruction, for every configured model.
    SimpleInstruction(RunArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let config = cli.config.as_deref();
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest(config, &args),
        Command::MakeTasks(args) => commands::make_tasks(config, &args),
        Command::Run(args) => commands::run(config, &args, None),
        Command::Score(args) => commands::score(&args),
        Command::Report(args) => commands::report(&args),
        Command::Label(LabelCommand::Export { records, labels, out }) => {
            commands::label_export(&records, labels.as_deref(), &out)
        }
        Command::Label(LabelCommand::Import { input, labels }) => commands::label_import(&input, &labels),
        Command::Baseline(BaselineCommand::ShortestPath { snapshot, tasks, out }) => {
            commands::shortest_path(config, &snapshot, &tasks, &out)
        }
        Command::Baseline(BaselineCommand::SimpleInstruction(args)) => {
            commands::run(config, &args, Some(kgreason::Strategy::SimpleInstruction))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
