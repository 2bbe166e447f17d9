//! `boilerseq`: build vocabularies, train, evaluate and apply the block
//! labeler from the command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use boilerseq::par::Exec;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "boilerseq",
    version,
    about = "Boilerplate removal with a bidirectional LSTM over DOM text blocks"
)]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    /// Log debug output (e.g. every clipped gradient).
    #[arg(short, long, global = true, conflicts_with = "quiet")]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded train/val/test split manifest for a page directory.
    Split(SplitArgs),
    /// Build a tag/word vocabulary from labeled pages.
    Vocab(VocabArgs),
    /// Train a model and write checkpoints, history and a run manifest.
    Train(TrainArgs),
    /// Score a model against labeled pages.
    Eval(EvalArgs),
    /// Print per-block content probabilities for one page.
    Predict(PredictArgs),
    /// Write a copy of a page with predicted content highlighted.
    Annotate(AnnotateArgs),
    /// Generate a labeled synthetic corpus (for demos and smoke tests).
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// `TRAIN,VAL,TEST` page counts; must add up to the number of pages.
    #[arg(long)]
    pub counts: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VocabArgs {
    /// Directory of .html/.htm pages.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Number of tag entries.
    #[arg(long, default_value_t = boilerseq::corpus::DEFAULT_TAG_VOCAB)]
    pub k: usize,
    /// Number of word entries.
    #[arg(long, default_value_t = boilerseq::corpus::DEFAULT_WORD_VOCAB)]
    pub l: usize,
    /// Split manifest; only its training pages are read.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Metric {
    Content,
    Boilerplate,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Split manifest file, or `TRAIN,VAL,TEST` page counts for a seeded split.
    #[arg(long)]
    pub split: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds the split, the initialization, batching and dropout.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Hidden units per direction.
    #[arg(long, default_value_t = boilerseq::model::ModelConfig::DEFAULT_HIDDEN)]
    pub hidden: usize,
    #[arg(long, default_value_t = boilerseq::model::ModelConfig::DEFAULT_LAYERS)]
    pub layers: usize,
    /// Embedding width.
    #[arg(long, default_value_t = boilerseq::model::ModelConfig::DEFAULT_EMBED)]
    pub embed: usize,
    #[arg(long, default_value_t = boilerseq::model::ModelConfig::DEFAULT_DROPOUT)]
    pub dropout: f64,
    #[arg(long, default_value_t = 5.0)]
    pub clip_norm: f64,
    #[arg(long, default_value_t = boilerseq::eval::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Validation score used to pick best.bseq.
    #[arg(long, value_enum, default_value_t = Metric::Content)]
    pub checkpoint_metric: Metric,
    /// Use equal class weights instead of balancing the training split.
    #[arg(long)]
    pub unweighted: bool,
    /// Also write epoch-NNN.bseq after every epoch.
    #[arg(long)]
    pub keep_epochs: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Subset {
    Train,
    Val,
    Test,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Restrict to one part of a split manifest.
    #[arg(long, requires = "subset")]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, requires = "split")]
    pub subset: Option<Subset>,
    #[arg(long, default_value_t = boilerseq::eval::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Directory for report.tsv, report.json and manifest.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Page to label, `-` for standard input.
    #[arg(long)]
    pub html: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = boilerseq::eval::DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Args, Debug)]
pub struct AnnotateArgs {
    /// Page to annotate, `-` for standard input.
    #[arg(long)]
    pub html: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = boilerseq::eval::DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 30)]
    pub pages: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let level = if cli.quiet {
        log::LevelFilter::Warn
    } else if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let result = match &cli.command {
        Command::Split(a) => commands::split(a),
        Command::Vocab(a) => commands::vocab(a, exec),
        Command::Train(a) => commands::train(a, exec),
        Command::Eval(a) => commands::eval(a, exec),
        Command::Predict(a) => commands::predict(a),
        Command::Annotate(a) => commands::annotate(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
