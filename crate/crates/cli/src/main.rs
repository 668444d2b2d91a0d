//! `sla` command-line tool. Every artifact-producing command writes its
//! outputs plus `manifest.json` into `--out`.

mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Io { .. } | CliError::Internal(_) => 3,
        }
    }
}

impl From<sla::Error> for CliError {
    fn from(e: sla::Error) -> Self {
        use sla::Error as E;
        match e {
            E::InvalidArgument(_) => CliError::Usage(e.to_string()),
            E::DimensionMismatch { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sla", version, about = "Supervised line attention for pathology report attributes")]
struct Cli {
    /// Worker threads for trials, folds and curve cells.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Line-delimited corpus file.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Schema file; defaults to the built-in attribute schema.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AttrArgs {
    /// Attribute(s) to model, comma-separated. Defaults to every attribute
    /// annotated on all documents.
    #[arg(long, value_delimiter = ',')]
    pub attribute: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth(commands::SynthArgs),
    /// Check a corpus against the schema.
    Validate(commands::ValidateArgs),
    /// Train one model per attribute.
    Train(commands::TrainArgs),
    /// Predict labels and rationales.
    Predict(commands::PredictArgs),
    /// Score predictions against gold labels.
    Evaluate(commands::EvaluateArgs),
    /// Random search with cross-validation.
    Tune(commands::TuneArgs),
    /// Tune and evaluate over training-set sizes and reshuffled runs.
    LearningCurve(commands::CurveArgs),
    /// Agreement between two annotations of the same reports.
    Agreement(commands::AgreementArgs),
    /// Extract and parse TNM stage tokens.
    Stage(commands::StageArgs),
}

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(CliError::Usage(e.render().to_string()));
        }
    };
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let rest: Vec<String> = argv.into_iter().skip(1).collect();
    match cli.command {
        Command::Synth(a) => commands::synth(a, rest),
        Command::Validate(a) => commands::validate(a, rest),
        Command::Train(a) => commands::train(a, rest),
        Command::Predict(a) => commands::predict(a, rest),
        Command::Evaluate(a) => commands::evaluate(a, rest),
        Command::Tune(a) => commands::tune(a, rest),
        Command::LearningCurve(a) => commands::learning_curve(a, rest),
        Command::Agreement(a) => commands::agreement(a, rest),
        Command::Stage(a) => commands::stage(a, rest),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().trim_end());
            ExitCode::from(e.exit_code())
        }
    }
}
