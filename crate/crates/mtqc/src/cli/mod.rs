//! Command-line pipeline: dataset conversion, edit-rate scoring, feature
//! extraction, training, grid search, evaluation, the regression-threshold
//! baseline, and report generation.
//!
//! Every subcommand accepts `--config FILE` pointing at a key-value text
//! file whose keys mirror the long flag names; explicit flags win over the
//! file. All randomness in a command flows from its single `--seed`.

mod data;
mod evaluation;
mod fe;
mod kv;
mod modeling;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;

pub use kv::{threshold_key, KvMap};

#[derive(Debug, Parser)]
#[command(
    name = "mtqc",
    about = "Quality classification for machine translation output",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert line-aligned QE files into a labeled QC TSV.
    Convert(ConvertArgs),
    /// Score hypothesis lines against reference lines with TER.
    Ter(TerArgs),
    /// Train the desk-scale feature extractor on parallel data.
    TrainFe(TrainFeArgs),
    /// Extract per-token feature sequences for a QC TSV.
    Extract(ExtractArgs),
    /// Train a classifier or regressor on extracted features.
    Train(TrainArgs),
    /// Grid-search hyper-parameters on the dev metric.
    Grid(GridArgs),
    /// Evaluate a trained model and write scores plus a metric block.
    Eval(EvalArgs),
    /// Regression baseline: sweep a good/bad cutoff over predicted rates.
    Sweep(SweepArgs),
    /// Combine metric blocks into a results table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Key-value config file mirroring these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Source sentences, one per line.
    #[arg(long)]
    pub src: Option<PathBuf>,
    /// Machine translations, line-aligned with --src.
    #[arg(long)]
    pub mt: Option<PathBuf>,
    /// Human post-edits (optional when --hter is given).
    #[arg(long)]
    pub pe: Option<PathBuf>,
    /// Precomputed edit rates, one decimal per line.
    #[arg(long)]
    pub hter: Option<PathBuf>,
    /// Output TSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Split name: train, dev, or test.
    #[arg(long)]
    pub split: Option<String>,
    /// Language pair identifier, e.g. En-De.
    #[arg(long)]
    pub lang: Option<String>,
    /// Edit-rate tolerance under which a sample counts as good.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Keep the original casing instead of lowercasing.
    #[arg(long)]
    pub keep_case: bool,
}

#[derive(Debug, Args)]
pub struct TerArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hypothesis sentences, one per line.
    #[arg(long)]
    pub hyp: Option<PathBuf>,
    /// Reference sentences, line-aligned with --hyp.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Output TSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub keep_case: bool,
}

#[derive(Debug, Args)]
pub struct TrainFeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Source side of the parallel corpus.
    #[arg(long)]
    pub parallel_src: Option<PathBuf>,
    /// Target side of the parallel corpus.
    #[arg(long)]
    pub parallel_tgt: Option<PathBuf>,
    /// Output path for the extractor bundle.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// N-gram order of the directional language models.
    #[arg(long)]
    pub order: Option<usize>,
    /// Additive smoothing mass.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Embedding dimension.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub keep_case: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extractor bundle written by train-fe.
    #[arg(long)]
    pub fe: Option<PathBuf>,
    /// Labeled QC TSV to extract features for.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output feature file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub lang: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train_features: Option<PathBuf>,
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    #[arg(long)]
    pub dev_features: Option<PathBuf>,
    #[arg(long)]
    pub dev_data: Option<PathBuf>,
    /// Output model path.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Optional per-epoch report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Head: classification or regression.
    #[arg(long)]
    pub head: Option<String>,
    /// Regression loss: mae or mse.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weight on the positive class in the cross-entropy loss.
    #[arg(long)]
    pub pos_weight: Option<f64>,
    /// Precision floor for the per-epoch dev metric.
    #[arg(long)]
    pub precision_target: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Comma-separated layer counts to try.
    #[arg(long)]
    pub grid_layers: Option<String>,
    /// Comma-separated hidden sizes to try.
    #[arg(long)]
    pub grid_hidden: Option<String>,
    /// Comma-separated dropout rates to try.
    #[arg(long)]
    pub grid_dropout: Option<String>,
    /// Comma-separated learning rates to try.
    #[arg(long)]
    pub grid_lr: Option<String>,
    /// Output TSV listing every configuration's dev metric.
    #[arg(long)]
    pub results: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Per-sample scores output.
    #[arg(long)]
    pub scores_out: Option<PathBuf>,
    /// Metric block output.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    /// Name shown in the Model column of reports.
    #[arg(long)]
    pub model_name: Option<String>,
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long)]
    pub split: Option<String>,
    /// Comma-separated precision floors, strictly increasing in (0, 1].
    #[arg(long)]
    pub thresholds: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Regression model to sweep.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output table path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sweep interval lower bound.
    #[arg(long)]
    pub lo: Option<f64>,
    /// Sweep interval upper bound.
    #[arg(long)]
    pub hi: Option<f64>,
    /// Sweep step.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long)]
    pub thresholds: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Metric block files, in row order.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub inputs: Vec<PathBuf>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse argv and run the selected command.
pub fn run() -> Result<()> {
    let cli = Cli::parse();
    dispatch(cli)
}

/// Run with explicit arguments (used by tests).
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::parse_from(args);
    dispatch(cli)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert(args) => data::cmd_convert(args),
        Command::Ter(args) => data::cmd_ter(args),
        Command::TrainFe(args) => fe::cmd_train_fe(args),
        Command::Extract(args) => fe::cmd_extract(args),
        Command::Train(args) => modeling::cmd_train(args),
        Command::Grid(args) => modeling::cmd_grid(args),
        Command::Eval(args) => evaluation::cmd_eval(args),
        Command::Sweep(args) => evaluation::cmd_sweep(args),
        Command::Report(args) => evaluation::cmd_report(args),
    }
}

/// Parse a strictly increasing list of precision floors in (0, 1].
pub(crate) fn parse_thresholds(raw: &str) -> Result<Vec<f64>> {
    use crate::error::QcError;
    let values: Vec<f64> = raw
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| QcError::Config(format!("bad threshold {p:?}")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(QcError::Config("empty threshold list".into()));
    }
    for pair in values.windows(2) {
        if pair[1] <= pair[0] {
            return Err(QcError::Config(format!(
                "thresholds must be strictly increasing, got {raw:?}"
            )));
        }
    }
    for &t in &values {
        if !(t > 0.0 && t <= 1.0) {
            return Err(QcError::Config(format!(
                "thresholds must lie in (0, 1], got {t}"
            )));
        }
    }
    Ok(values)
}

pub(crate) const DEFAULT_THRESHOLDS: &str = "0.8,0.9";
