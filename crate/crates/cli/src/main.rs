mod artifacts;
mod commands;
mod failure;
mod inputs;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mdcr::retrieval::Direction;
use mdcr::{DatasetPreset, Task};

use failure::Failure;

#[derive(Parser)]
#[command(name = "mdcr", version, about = "Modality-dependent cross-media retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a separable Gaussian-blob paired dataset and split it.
    Synth(SynthArgs),
    /// Learn a projection pair for one task.
    Train(TrainArgs),
    /// Rank a labelled test set with a trained model and score it.
    Eval(EvalArgs),
    /// Print the nearest gallery items for one query.
    Query(QueryArgs),
    /// Compare analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Rerun the published Wikipedia comparisons.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Clone)]
pub struct InputArgs {
    /// Image feature matrix (text or binary format).
    #[arg(long)]
    pub images: PathBuf,
    /// Text feature matrix (text or binary format).
    #[arg(long)]
    pub texts: PathBuf,
    /// One integer label per line.
    #[arg(long)]
    pub labels: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 25)]
    pub per_class: usize,
    #[arg(long, default_value_t = 12)]
    pub image_dim: usize,
    #[arg(long, default_value_t = 8)]
    pub text_dim: usize,
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long, value_enum, default_value_t = FileFormat::Binary)]
    pub format: FileFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FileFormat {
    Text,
    Binary,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub task: Task,
    #[command(flatten)]
    pub inputs: InputArgs,
    /// Published hyperparameters to start from.
    #[arg(long, default_value = "custom")]
    pub preset: DatasetPreset,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub eta1: Option<f64>,
    #[arg(long)]
    pub eta2: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub max_inner: Option<usize>,
    /// Keep the step size fixed; a rejected step ends the inner loop.
    #[arg(long)]
    pub fixed_step: bool,
    /// Start from seeded Gaussian projections with this scale instead of zeros.
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Z-score features with training-set column statistics.
    #[arg(long)]
    pub zscore: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub inputs: InputArgs,
    #[arg(long)]
    pub direction: Direction,
    /// Evaluate a single-task model in the other direction.
    #[arg(long)]
    pub allow_cross_task: bool,
    /// Truncate average precision at this rank.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, default_value_t = mdcr::eval::DEFAULT_PR_POINTS)]
    pub pr_points: usize,
    /// Also write every ranking as JSON lines.
    #[arg(long)]
    pub rankings: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub inputs: InputArgs,
    #[arg(long)]
    pub direction: Direction,
    #[arg(long)]
    pub allow_cross_task: bool,
    /// Row of the query in its feature file.
    #[arg(long)]
    pub index: usize,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 7)]
    pub image_dim: usize,
    #[arg(long, default_value_t = 5)]
    pub text_dim: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Random evaluation points per task.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = mdcr::gradcheck::DEFAULT_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = mdcr::gradcheck::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eta1: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eta2: f64,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    Table1,
    Table2,
}

#[derive(Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub which: Table,
    /// Directory holding the Wikipedia feature files.
    #[arg(long, env = "MDCR_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Run on generated data instead; published columns read "n/a".
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub zscore: bool,
    /// Train and evaluate the models concurrently.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Query(a) => commands::query(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
        Command::Reproduce(a) => reproduce::run(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mdcr: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

pub(crate) fn argv() -> Vec<String> {
    std::env::args().collect()
}

pub(crate) type Outcome = Result<(), Failure>;
