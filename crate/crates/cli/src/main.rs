//! `polysrl`: corpus statistics, embedding preparation, training, prediction,
//! scoring and report comparison for CoNLL 2009 semantic role labeling.
//!
//! Exit codes: 0 success, 1 runtime failure (bad input, numeric or training
//! error), 2 invalid command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "polysrl", version, about = "Polyglot dependency semantic role labeling")]
struct Cli {
    /// Base directory for relative input paths (train config data paths and
    /// command-line inputs).
    #[arg(long, global = true, env = "POLYSRL_DATA_DIR")]
    data_dir: Option<PathBuf>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print sentence and predicate counts of a CoNLL 2009 file as CSV.
    Stats(StatsArgs),
    /// Embedding preparation.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Train a model from a TOML run file.
    Train(TrainArgs),
    /// Label the predicates of a CoNLL 2009 file.
    Predict(PredictArgs),
    /// Score predicted against gold CoNLL 2009 files.
    Score(ScoreArgs),
    /// Compare two JSON score reports (B minus A).
    Analyze(AnalyzeArgs),
    /// Write a seeded synthetic corpus and matching word vectors.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub lang: String,
    /// Omit the CSV header line.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Subcommand, Debug)]
enum EmbedCommand {
    /// Reduce vectors with PCA and optionally align them onto a pivot space.
    Prepare(PrepareArgs),
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    /// Number of principal components to keep.
    #[arg(long)]
    pub pca: usize,
    /// Prepared pivot-language table (already reduced to --pca dimensions).
    #[arg(long, requires = "dict")]
    pub align_to: Option<PathBuf>,
    /// Tab-separated foreign/pivot word pairs.
    #[arg(long, requires = "align_to")]
    pub dict: Option<PathBuf>,
    /// Canonical dimensions used for alignment (default: --pca).
    #[arg(long)]
    pub cca_dim: Option<usize>,
    #[arg(long, default_value_t = polysrl::embeddings::DEFAULT_CCA_RIDGE)]
    pub ridge: f64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `train.seed` from the run file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub lang: String,
    #[arg(long)]
    pub output: PathBuf,
    /// Word vectors to use instead of the file recorded in the checkpoint.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub lang: String,
    /// Write the full report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the per-label table as CSV.
    #[arg(long)]
    pub per_label: Option<PathBuf>,
    /// Write labeled/unlabeled P, R, F1 as CSV.
    #[arg(long)]
    pub overall: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub reports: Vec<PathBuf>,
    /// Write the comparison CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub lang: String,
    #[arg(long, default_value_t = 20)]
    pub sentences: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Use the small memorizable layout (one predicate per sentence, six word types).
    #[arg(long)]
    pub overfit: bool,
    /// Directory receiving train.conll09, dev.conll09 and vectors.txt.
    #[arg(long)]
    pub output_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let ctx = commands::Context {
        data_dir: cli.data_dir,
    };
    let result = match cli.command {
        Command::Stats(a) => commands::stats(&ctx, a),
        Command::Embed(EmbedCommand::Prepare(a)) => commands::embed_prepare(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Predict(a) => commands::predict(&ctx, a),
        Command::Score(a) => commands::score(&ctx, a),
        Command::Analyze(a) => commands::analyze(&ctx, a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(1)
        }
    }
}
