//! `typodist`: build, query and evaluate a typological knowledge base.

mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use typodist_core::{AggregationMode, FeatureCategory, Metric};

use config::{CliConfig, ImputerChoice};

#[derive(Debug)]
pub enum CliError {
    /// Bad query: unknown identifiers, missing inputs, unmet preconditions.
    Query(String),
    /// Malformed input files.
    Input(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Query(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Query(m) | CliError::Input(m) => f.write_str(m),
        }
    }
}

impl From<typodist_core::Error> for CliError {
    fn from(e: typodist_core::Error) -> Self {
        if e.is_input_format() {
            CliError::Input(e.to_string())
        } else {
            CliError::Query(e.to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "typodist", version, about = "Typological language knowledge base")]
pub struct Cli {
    /// Knowledge base directory.
    #[arg(long, global = true, env = "TYPODIST_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// TOML file with defaults.
    #[arg(long, global = true, env = "TYPODIST_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest source exports into the knowledge base.
    Ingest(IngestArgs),
    /// Write the aggregated language x feature matrix as CSV.
    Aggregate(AggregateArgs),
    /// Impute missing cells and write the matrix plus a mask CSV.
    Impute(ImputeArgs),
    /// Distance between two or more languages.
    Distance(DistanceArgs),
    /// Confidence components for a language pair.
    Confidence(ConfidenceArgs),
    /// Evaluation workflows.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// JSON schema declaring each raw feature label's kind and category.
    #[arg(long)]
    schema: PathBuf,
    /// Source export as NAME=PATH (repeatable).
    #[arg(long = "source", value_name = "NAME=PATH", required = true)]
    sources: Vec<String>,
    /// Language metadata CSV (glottocode,iso639_3,name,parent,tier).
    #[arg(long)]
    languages: Option<PathBuf>,
    /// Redundancy rules CSV.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Extra identifier mappings (external_id,glottocode,retired_flag).
    #[arg(long)]
    resolution: Option<PathBuf>,
    /// Replace existing cells instead of failing on conflicting writes.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[arg(long, alias = "aggregation")]
    mode: Option<AggregationMode>,
    /// Restrict to these sources (repeatable).
    #[arg(long = "source")]
    sources: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    /// mean, knn, knn:<k>, softimpute, softimpute:<lambda>, external:<name>
    #[arg(long)]
    imputer: Option<ImputerChoice>,
    /// Dense CSV with values for an external imputer.
    #[arg(long)]
    external_file: Option<PathBuf>,
    /// Fill dialect gaps from parent languages first.
    #[arg(long)]
    dialect_fill: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Values CSV; the mask goes next to it as <stem>.mask.csv.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// Comma-separated feature names.
    #[arg(long, value_delimiter = ',', conflicts_with = "category")]
    features: Vec<String>,
    #[arg(long)]
    category: Option<FeatureCategory>,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    /// Languages (glottocodes or ISO codes); every pair is reported.
    #[arg(required = true, num_args = 2..)]
    languages: Vec<String>,
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long)]
    aggregation: Option<AggregationMode>,
    #[command(flatten)]
    features: FeatureArgs,
    #[arg(long = "source")]
    sources: Vec<String>,
    /// Impute before measuring.
    #[arg(long)]
    impute: Option<ImputerChoice>,
    #[arg(long)]
    dialect_fill: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ConfidenceArgs {
    lang_a: String,
    lang_b: String,
    #[command(flatten)]
    features: FeatureArgs,
    #[arg(long)]
    aggregation: Option<AggregationMode>,
    /// Imputer whose cached quality run supplies the imputation component.
    #[arg(long)]
    impute: Option<ImputerChoice>,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Hide 20% of observed cells, impute, and score.
    Quality(QualityArgs),
    /// Rank correlation of two distance columns with a reference.
    Casestudy(CaseStudyArgs),
    /// Languages with data per category and resource tier.
    Coverage,
}

#[derive(Debug, Args)]
pub struct QualityArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[arg(long)]
    imputer: Option<ImputerChoice>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip dialect fill after masking.
    #[arg(long)]
    no_dialect_fill: bool,
    /// Store the result for later confidence queries.
    #[arg(long)]
    record: bool,
}

#[derive(Debug, Args)]
pub struct CaseStudyArgs {
    /// CSV with columns pair,dist_a,dist_b,g_d.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    iterations: usize,
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<String, CliError> {
    let config = CliConfig::load(cli.config.as_deref(), cli.data_dir)?;
    let report = match cli.command {
        Command::Ingest(a) => commands::ingest(&config, a)?,
        Command::Aggregate(a) => commands::aggregate(&config, a)?,
        Command::Impute(a) => commands::impute(&config, a)?,
        Command::Distance(a) => commands::distance(&config, a)?,
        Command::Confidence(a) => commands::confidence(&config, a)?,
        Command::Eval(EvalCommand::Quality(a)) => commands::quality(&config, a)?,
        Command::Eval(EvalCommand::Casestudy(a)) => commands::casestudy(&config, a)?,
        Command::Eval(EvalCommand::Coverage) => commands::coverage(&config)?,
    };
    Ok(match cli.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("reports serialize") + "\n",
        Format::Table => table::render(&report),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
