use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error (unknown flag, missing argument)
  3  unknown schema profile
  4  missing input path
  5  config error (TOML type mismatch or out-of-range value)
  6  corpus validation failure
  7  runtime failure (I/O, numerics, training)
  8  gradient check above tolerance

Errors are reported on stderr as one JSON object:
  {\"error\": <kind>, \"exit_code\": <n>, \"message\": <text>}

Every flag can also be set through an environment variable named
REGIMEN_<FLAG> (upper case, dashes as underscores), e.g. REGIMEN_SEED.
Flags override environment variables, which override the config file.";

#[derive(Debug, Parser)]
#[command(
    name = "regimen",
    version,
    about = "Simultaneous pairwise relation extraction for medication information",
    after_help = EXIT_CODES
)]
pub struct Cli {
    /// Base directory for every relative path.
    #[arg(long, global = true, env = "REGIMEN_WORKDIR", default_value = ".")]
    pub workdir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic gold corpus as .txt/.ann pairs with manifest.json.
    Generate(GenerateArgs),
    /// Train a model on a standoff corpus and write a checkpoint.
    Train(TrainArgs),
    /// Predict relations for the entities of a corpus.
    Predict(PredictArgs),
    /// Score predictions (or a model) against gold relations.
    Evaluate(EvaluateArgs),
    /// Predict on externally recognised entities and score against gold.
    EndToEnd(EndToEndArgs),
    /// Convert relation annotations to frames or frame-augmented relations.
    ConvertFrames(ConvertArgs),
    /// Compare encoder passes and wall-clock of both architectures.
    CostReport(CostArgs),
    /// Compare analytic and finite-difference gradients of the full model.
    GradCheck(GradCheckArgs),
    /// Print corpus statistics.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Strict,
    Lenient,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ArchArg {
    Pairwise,
    Baseline,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FrameFormat {
    /// frames.json holding one frame set per document.
    Json,
    /// Documents with SAME_FRAME edges added.
    Augmented,
    /// Documents with SAME_FRAME edges removed.
    Plain,
}

#[derive(Debug, Args)]
pub struct SchemaArgs {
    /// Built-in profile name (corp-hus, n2c2) or path to a profile TOML.
    #[arg(long, env = "REGIMEN_SCHEMA", default_value = "corp-hus")]
    pub schema: String,
    /// Map unknown entity types to OTHER and drop unknown relation types.
    #[arg(long, env = "REGIMEN_LAX")]
    pub lax: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Config file; its [generate] table sets generator fields.
    #[arg(long, env = "REGIMEN_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "REGIMEN_SEED")]
    pub seed: Option<u64>,
    /// Number of documents.
    #[arg(long, env = "REGIMEN_DOCS")]
    pub docs: Option<usize>,
    /// Built-in profile name (corp-hus, n2c2).
    #[arg(long, env = "REGIMEN_SCHEMA")]
    pub schema: Option<String>,
    /// Probability that a drug sentence carries two frames.
    #[arg(long, env = "REGIMEN_MULTI_FRAME_RATE")]
    pub multi_frame_rate: Option<f64>,
    /// Also write train/ and test/ subsets with this training fraction.
    #[arg(long, env = "REGIMEN_SPLIT")]
    pub split: Option<f64>,
    /// Output directory.
    #[arg(long, env = "REGIMEN_OUT")]
    pub out: PathBuf,
    /// Worker threads for generation.
    #[arg(long, env = "REGIMEN_THREADS")]
    pub threads: Option<usize>,
}

/// Training flags shared by `train` and `cost-report`.
#[derive(Debug, Args)]
pub struct TrainFlags {
    /// Config file; its [train] table sets training and model fields.
    #[arg(long, env = "REGIMEN_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "REGIMEN_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "REGIMEN_EPOCHS")]
    pub epochs: Option<usize>,
    #[arg(long, env = "REGIMEN_BATCH_SIZE")]
    pub batch_size: Option<usize>,
    /// Peak learning rate.
    #[arg(long, env = "REGIMEN_LR")]
    pub lr: Option<f64>,
    /// Window length in characters.
    #[arg(long, env = "REGIMEN_WINDOW")]
    pub window: Option<usize>,
    /// Window stride in characters.
    #[arg(long, env = "REGIMEN_STRIDE")]
    pub stride: Option<usize>,
    /// Train with SAME_FRAME augmentation edges.
    #[arg(long, env = "REGIMEN_FRAME_AUGMENTATION")]
    pub frame_augmentation: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training corpus directory.
    #[arg(long, env = "REGIMEN_DATA")]
    pub data: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long, env = "REGIMEN_ARCHITECTURE", value_enum)]
    pub architecture: Option<ArchArg>,
    /// Output directory for model.ckpt, train_log.jsonl and run.json.
    #[arg(long, env = "REGIMEN_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint file, or a directory holding model.ckpt.
    #[arg(long, env = "REGIMEN_MODEL")]
    pub model: PathBuf,
    /// Corpus whose entities are used; its relations are ignored.
    #[arg(long, env = "REGIMEN_DATA")]
    pub data: PathBuf,
    /// Map unknown entity types to OTHER and drop unknown relation types.
    #[arg(long, env = "REGIMEN_LAX")]
    pub lax: bool,
    #[arg(long, env = "REGIMEN_OUT")]
    pub out: PathBuf,
    /// Worker threads for inference.
    #[arg(long, env = "REGIMEN_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Gold corpus directory.
    #[arg(long, env = "REGIMEN_GOLD")]
    pub gold: PathBuf,
    /// Predicted corpus directory.
    #[arg(long, env = "REGIMEN_PRED", conflicts_with = "model", required_unless_present = "model")]
    pub pred: Option<PathBuf>,
    /// Predict with this checkpoint instead of reading --pred.
    #[arg(long, env = "REGIMEN_MODEL")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long, env = "REGIMEN_MODE", value_enum, default_value = "both")]
    pub mode: ModeArg,
    /// Directory for report.json and run.json.
    #[arg(long, env = "REGIMEN_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads for inference.
    #[arg(long, env = "REGIMEN_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EndToEndArgs {
    #[arg(long, env = "REGIMEN_MODEL")]
    pub model: PathBuf,
    /// Corpus of recognised entities (.ann files with T lines).
    #[arg(long, env = "REGIMEN_ENTITIES")]
    pub entities: PathBuf,
    /// Gold corpus directory.
    #[arg(long, env = "REGIMEN_GOLD")]
    pub gold: PathBuf,
    /// Map unknown entity types to OTHER and drop unknown relation types.
    #[arg(long, env = "REGIMEN_LAX")]
    pub lax: bool,
    /// Directory for predictions, report.json and run.json.
    #[arg(long, env = "REGIMEN_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads for inference.
    #[arg(long, env = "REGIMEN_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, env = "REGIMEN_DATA")]
    pub data: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long, env = "REGIMEN_FORMAT", value_enum, default_value = "json")]
    pub format: FrameFormat,
    #[arg(long, env = "REGIMEN_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Corpus directory; a default synthetic corpus is generated if omitted.
    #[arg(long, env = "REGIMEN_DATA")]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Directory for cost.json and run.json.
    #[arg(long, env = "REGIMEN_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// Preset name (small) or config file with a [grad_check] table.
    #[arg(long, env = "REGIMEN_CONFIG", default_value = "small")]
    pub config: String,
    #[arg(long, env = "REGIMEN_SEED")]
    pub seed: Option<u64>,
    /// Coordinates sampled per parameter tensor.
    #[arg(long, env = "REGIMEN_SAMPLES")]
    pub samples: Option<usize>,
    /// Largest accepted relative error.
    #[arg(long, env = "REGIMEN_TOLERANCE")]
    pub tolerance: Option<f64>,
    /// Directory for gradcheck.json and run.json.
    #[arg(long, env = "REGIMEN_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads for finite differences.
    #[arg(long, env = "REGIMEN_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, env = "REGIMEN_DATA")]
    pub data: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Directory for stats.json and run.json.
    #[arg(long, env = "REGIMEN_OUT")]
    pub out: Option<PathBuf>,
}
