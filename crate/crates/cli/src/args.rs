//! Command line surface.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use yearguessr_core::record::Split;

#[derive(Debug, Parser)]
#[command(
    name = "yearguessr",
    version,
    about = "Construction-year estimation for buildings over precomputed embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a building manifest; optionally convert CSV embeddings to
    /// the binary format.
    Ingest(IngestArgs),
    /// Assign stratified train/val/test labels to a manifest.
    Split(SplitArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Predict construction years for manifest records.
    Predict(PredictArgs),
    /// Score a prediction file against ground truth.
    Eval(EvalArgs),
    /// Compare analytic gradients against finite differences on a synthetic
    /// model.
    Gradcheck(GradcheckArgs),
    /// Aggregate evaluation reports across runs.
    Report(ReportArgs),
}

/// Split label as a command line value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Building manifest (JSON Lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Lowest acceptable construction year.
    #[arg(long, default_value_t = 800)]
    pub min_year: i32,
    /// Highest acceptable construction year.
    #[arg(long, default_value_t = 2100)]
    pub max_year: i32,
    /// Embedding CSV to convert: id in the first column, then one column
    /// per dimension.
    #[arg(long, requires = "out")]
    pub csv: Option<PathBuf>,
    /// The CSV starts with a header row.
    #[arg(long)]
    pub has_header: bool,
    /// L2-normalize each row during conversion.
    #[arg(long)]
    pub normalize: bool,
    /// Output path for the converted embedding file.
    #[arg(long, requires = "csv")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Building manifest (JSON Lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the labeled manifest. Defaults to rewriting in place.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Building manifest (JSON Lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Image embedding file keyed by record id.
    #[arg(long)]
    pub images: PathBuf,
    /// Style anchor embedding file keyed by period name.
    #[arg(long)]
    pub styles: PathBuf,
    /// Reason anchor embedding file keyed by `reason/label`.
    #[arg(long)]
    pub reasons: PathBuf,
    /// Training configuration (`key = value` lines). Defaults apply when
    /// omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss log output (JSON Lines).
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random Fourier feature count of the GPS encoder.
    #[arg(long, default_value_t = 64)]
    pub rff_features: usize,
    /// Frequency scale of the GPS encoder.
    #[arg(long, default_value_t = 1.0)]
    pub rff_sigma: f64,
    /// Hidden width of the ordinal regression head.
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint to load.
    #[arg(long)]
    pub model: PathBuf,
    /// Building manifest (JSON Lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Image embedding file keyed by record id.
    #[arg(long)]
    pub images: PathBuf,
    /// Style anchor embedding file keyed by period name.
    #[arg(long)]
    pub styles: PathBuf,
    /// Reason anchor embedding file keyed by `reason/label`.
    #[arg(long)]
    pub reasons: PathBuf,
    /// Prediction output (JSON Lines, one object per record, id order).
    #[arg(long)]
    pub out: PathBuf,
    /// Only predict records carrying this split label.
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    /// Worker threads. Overrides YEARGUESSR_THREADS; 0 picks automatically.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Building manifest (JSON Lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Prediction file (JSON Lines).
    #[arg(long)]
    pub preds: PathBuf,
    /// Write the full report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write per-record (predicted, actual) pairs as CSV here.
    #[arg(long)]
    pub scatter: Option<PathBuf>,
    /// Only score records carrying this split label. The prediction file
    /// must cover exactly the same records.
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    /// Recorded in the report so aggregation can tell runs apart.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Image embedding dimension of the synthetic model.
    #[arg(long, default_value_t = 10)]
    pub img_dim: usize,
    /// Fused embedding dimension.
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    /// Random Fourier feature count.
    #[arg(long, default_value_t = 4)]
    pub rff_features: usize,
    /// Regressor hidden width.
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    /// Synthetic batch size. The last sample always carries no GPS.
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    /// Central difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    /// Check every stride-th parameter.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation report JSON files, one per run.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Write the aggregate as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
