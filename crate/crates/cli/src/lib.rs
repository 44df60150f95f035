//! Experiment driver: argument parsing, dispatch and diagnostics.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use xmodal_core::augment::ViewPolicy;
use xmodal_core::episodes::{EscVariant, ViewSelection};
use xmodal_core::eval::ReportFormat;
use xmodal_core::trainer::{OptimizerKind, TrainConfig};
use xmodal_core::Modality;

pub mod commands;

#[derive(Debug, Parser)]
#[command(name = "xmodal", version, about = "Cross-modal few-shot adaptation on pre-extracted features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Train linear heads (or adapters) on seeded few-shot episodes.
    Train(TrainArgs),
    /// Evaluate the text-initialized classifier without training.
    Zeroshot(ZeroshotArgs),
    /// Grid-search hyperparameters on the few-shot validation set.
    Sweep(SweepArgs),
    /// Rank text templates by zero-shot validation accuracy.
    Mine(MineArgs),
    /// Run the 25-run ImageNet-ESC protocol.
    Esc(EscArgs),
    /// Evaluate a checkpoint on a source test set and shifted test sets.
    Eval(EvalArgs),
    /// Two-component PCA figure of features with the decision boundary.
    Pca(PcaArgs),
    /// Aggregate per-run rows into a mean/std table.
    Report(ReportArgs),
    /// Feature store utilities.
    #[command(subcommand)]
    Store(StoreCommand),
    /// Generate a synthetic benchmark (image, text and audio stores).
    Synth(SynthArgs),
    /// Re-run a command from its runspec.json.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreCommand {
    /// Print a summary of a feature store.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Text,
    Zero,
}

/// Overrides for [`TrainConfig`]; unset flags keep the value from `--config` or the default.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TrainFlags {
    /// JSON file with a full or partial training configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub lr0: Option<f64>,
    #[arg(long, alias = "wd")]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, alias = "iters")]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub warmup_iters: Option<usize>,
    #[arg(long)]
    pub warmup_start_lr: Option<f64>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub logit_scale: Option<f64>,
    /// Train a residual MLP adapter together with the head.
    #[arg(long)]
    pub adapter_enabled: bool,
    #[arg(long)]
    pub residual_ratio: Option<f64>,
}

impl TrainFlags {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let mut value: serde_json::Value = serde_json::to_value(TrainConfig::default())?;
                let patch: serde_json::Value =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                let (Some(base), Some(patch)) = (value.as_object_mut(), patch.as_object()) else {
                    bail!("{} must hold a JSON object", path.display());
                };
                for (k, v) in patch {
                    base.insert(k.clone(), v.clone());
                }
                serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))?
            }
            None => TrainConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$( if let Some(v) = self.$field { c.$field = v; } )*};
        }
        set!(optimizer, lr0, weight_decay, batch_size, max_iters, warmup_iters, warmup_start_lr, eval_every, logit_scale, residual_ratio);
        c.adapter_enabled |= self.adapter_enabled;
        if c.max_iters > 0 && c.warmup_iters >= c.max_iters && self.warmup_iters.is_none() {
            c.warmup_iters = 0;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Where the few-shot episode comes from and which modalities train.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EpisodeArgs {
    /// Store holding the target modality (train/val/test).
    #[arg(long)]
    pub features: PathBuf,
    /// Target modality of `--features`.
    #[arg(long, default_value = "image")]
    pub modality: Modality,
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[arg(long)]
    pub audio: Option<PathBuf>,
    /// Image store used as an extra modality when the target is audio.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Modalities contributing training samples; defaults to the target plus every extra store given.
    #[arg(long, value_delimiter = ',')]
    pub modalities: Vec<Modality>,
    #[arg(long, default_value_t = 1)]
    pub shots: usize,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    /// Classifier initialization; defaults to `text` when `--text` is given.
    #[arg(long)]
    pub init: Option<InitKind>,
    /// Text views per class: `first:K`, `all`, `ids:1,2,3` or `mined:<file>`.
    #[arg(long, default_value = "first:1")]
    pub text_views: String,
    /// Image views per shot: `center`, `flip` or `crops:K`.
    #[arg(long, default_value = "center")]
    pub image_views: String,
    /// Fixed split file instead of seeded sampling.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Separate store whose canonical records form the test set.
    #[arg(long)]
    pub test_store: Option<PathBuf>,
    /// Dataset label for report rows (defaults to the manifest's dataset).
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Method label for report rows.
    #[arg(long)]
    pub method: Option<String>,
    /// Record wall-clock seconds (makes outputs non-deterministic).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub episode: EpisodeArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Also report the weight-space ensemble with the zero-shot head at this ratio.
    #[arg(long)]
    pub wise_alpha: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ZeroshotArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value = "image")]
    pub modality: Modality,
    #[arg(long)]
    pub text: PathBuf,
    #[arg(long, default_value = "first:1")]
    pub text_views: String,
    #[arg(long)]
    pub test_store: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub episode: EpisodeArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Grid preset (`linear-default`, `adapter-default`, `esc-default`) or a JSON file.
    #[arg(long, default_value = "linear-default")]
    pub grid: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MineArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value = "image")]
    pub modality: Modality,
    /// Text store with one view per template.
    #[arg(long)]
    pub text: PathBuf,
    /// Template file (one per line) used to name the mined ids; defaults to the text manifest or the bundled pool.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value_t = 21)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub shots: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscMethod {
    Uni,
    Cross,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EscArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub audio: PathBuf,
    #[arg(long, default_value = "19")]
    pub variant: EscVariant,
    #[arg(long, default_value_t = 1)]
    pub shots: usize,
    /// Shots per class of the other modality added in cross-modal runs.
    #[arg(long, default_value_t = 1)]
    pub extra_shots: usize,
    #[arg(long, value_delimiter = ',', default_value = "image,audio")]
    pub targets: Vec<Modality>,
    #[arg(long, value_delimiter = ',', default_value = "uni,cross")]
    pub methods: Vec<EscMethod>,
    /// Optional grid preset or JSON file searched per run.
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub source: PathBuf,
    /// Shifted test set as `NAME=STORE` or `NAME=STORE@REMAP.json`; repeatable.
    #[arg(long = "target")]
    pub targets: Vec<String>,
    #[arg(long, default_value = "image")]
    pub modality: Modality,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub shots: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PcaArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Stores whose canonical records are plotted; repeatable.
    #[arg(long = "features", required = true)]
    pub features: Vec<PathBuf>,
    /// Class ids to plot (default: the checkpoint's first two classes).
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<u32>,
    /// Output SVG path; the JSON sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Per-run row files written by other commands.
    #[arg(long = "rows", required = true)]
    pub rows: Vec<PathBuf>,
    #[arg(long, default_value = "markdown")]
    pub format: ReportFormat,
    /// Output file; prints to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InspectArgs {
    pub path: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = xmodal_core::synth::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 180)]
    pub templates: usize,
    /// Name classes after an ImageNet-ESC matching (19 or 27 pairs).
    #[arg(long)]
    pub esc: Option<EscVariant>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub runspec: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `first:K`, `all`, `ids:1,2` or `mined:<file>`.
pub fn parse_view_selection(spec: &str) -> Result<ViewSelection> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match kind {
        "all" => ViewSelection::All,
        "first" => ViewSelection::First(rest.parse().with_context(|| format!("bad view count in {spec:?}"))?),
        "ids" => ViewSelection::Views(
            rest.split(',')
                .map(|v| v.trim().parse::<u16>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("bad view id list in {spec:?}"))?,
        ),
        "mined" => {
            let path = PathBuf::from(rest);
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let mined: commands::MinedTemplates =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            ViewSelection::Views(mined.template_ids)
        }
        _ => bail!("unknown text view selection {spec:?} (first:K, all, ids:..., mined:FILE)"),
    })
}

pub fn parse_view_policy(spec: &str) -> Result<ViewPolicy> {
    spec.parse::<ViewPolicy>().map_err(anyhow::Error::msg)
}

/// Marker for failures that indicate a bug rather than bad input.
#[derive(Debug)]
pub struct InternalError(pub String);

impl std::fmt::Display for InternalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "internal invariant violated: {}", self.0)
    }
}

impl std::error::Error for InternalError {}

/// Single-line diagnostic naming the error class when one is known.
pub fn diagnostic(err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<xmodal_core::Error>())
        .map(xmodal_core::Error::kind)
        .or_else(|| err.chain().any(|e| e.is::<InternalError>()).then_some("Internal"));
    let message = err.chain().map(ToString::to_string).collect::<Vec<_>>().join(": ");
    let message = message.replace('\n', " ");
    match kind {
        Some(k) => format!("error[{k}]: {message}"),
        None => format!("error: {message}"),
    }
}

pub fn exit_code(err: &anyhow::Error) -> ExitCode {
    if err.chain().any(|e| e.is::<InternalError>()) {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

pub fn run(command: &Command) -> Result<()> {
    commands::dispatch(command)
}
