//! The `restyle` command line: `prepare`, `train`, `generate` and `eval`.
//!
//! Every command reads an optional TOML config (`--config`), then applies
//! `--set section.key=value` overrides, then the dedicated flags. Exit codes:
//! 0 success, 1 usage, 2 data error, 3 numerical failure.

mod config;
mod eval;
mod generate;
mod manifest;
mod prepare;
mod render;
mod train;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{DataConfig, GenerateConfig, GenerateMode, MetricsConfig, RunConfig, TruncationSettings};
pub use eval::{cmd_eval, EvalReport};
pub use generate::{cmd_generate, load_generator, GeneratedImages};
pub use manifest::{ManifestSnapshot, RunManifest};
pub use prepare::{cmd_prepare, cmd_prepare_toy, collect_input_dir, DetectionSource};
pub use render::render_grid;
pub use train::cmd_train;

use crate::data::DataError;
use crate::metrics::MetricError;
use crate::model::ModelError;
use crate::train::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) => CliError::Usage(e.to_string()),
            ModelError::Io(_) | ModelError::Format(_) => CliError::Data(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<crate::TensorError> for CliError {
    fn from(e: crate::TensorError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Input(_) => CliError::Usage(e.to_string()),
            MetricError::Data(_) => CliError::Data(e.to_string()),
            MetricError::Model(m) => m.into(),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            TrainError::Data(_) | TrainError::Io(_) => CliError::Data(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Metric(m) => m.into(),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "restyle", version, about = "Style-based GAN toolkit: prepare, train, generate, eval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.steps=100`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter, crop and shard a face corpus, or synthesize the toy dataset.
    Prepare(PrepareArgs),
    /// Train a generator/discriminator pair on shards.
    Train(TrainArgs),
    /// Render grids, truncation sweeps or noise ablations from a snapshot.
    Generate(GenerateArgs),
    /// Compute FID, PPL and linear separability for a snapshot.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct PrepareArgs {
    #[command(flatten)]
    common: Common,
    /// Directory of input images.
    #[arg(long, conflicts_with = "toy")]
    input: Option<PathBuf>,
    /// Detection file (one JSON record per line).
    #[arg(long, conflicts_with = "heuristic_detector")]
    detections: Option<PathBuf>,
    /// Detect faces with the built-in contrast heuristic.
    #[arg(long)]
    heuristic_detector: bool,
    /// Synthesize the toy dataset instead of reading images.
    #[arg(long)]
    toy: bool,
    /// Toy sample count (`toy.count`).
    #[arg(long, requires = "toy")]
    toy_count: Option<usize>,
    /// Output shard directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Shard directory (`data.shards`).
    #[arg(long)]
    shards: Option<PathBuf>,
    #[arg(long)]
    run_dir: PathBuf,
    /// `train.steps`.
    #[arg(long)]
    steps: Option<u64>,
    /// `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    snapshot: PathBuf,
    /// `generate.mode`.
    #[arg(long, value_enum)]
    mode: Option<GenerateMode>,
    /// `truncation.psi`.
    #[arg(long, allow_hyphen_values = true)]
    psi: Option<f64>,
    /// `generate.psi_values`, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    psi_values: Option<Vec<f64>>,
    /// `generate.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// `generate.noise_seed`.
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    snapshot: PathBuf,
    /// `metrics.list`, comma separated.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    /// Real shards for FID and the classifier (`data.shards`).
    #[arg(long)]
    shards: Option<PathBuf>,
    /// Attribute labels for the classifier (`data.labels`).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// `metrics.embedder`.
    #[arg(long)]
    embedder: Option<String>,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn load_config(common: &Common, flags: Vec<String>) -> Result<RunConfig, CliError> {
    let mut overrides = common.set.clone();
    overrides.extend(flags);
    RunConfig::load(common.config.as_deref(), &overrides)
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Prepare(a) => {
            let mut flags = Vec::new();
            if let Some(n) = a.toy_count {
                flags.push(format!("toy.count={n}"));
            }
            let cfg = load_config(&a.common, flags)?;
            if a.toy {
                cmd_prepare_toy(&cfg, &a.out, out)?;
                return Ok(());
            }
            let input = a
                .input
                .ok_or_else(|| CliError::Usage("prepare needs --input DIR or --toy".into()))?;
            let source = match (a.detections, a.heuristic_detector) {
                (Some(p), _) => DetectionSource::File(p),
                (None, true) => DetectionSource::Heuristic,
                (None, false) => {
                    return Err(CliError::Usage(
                        "prepare needs --detections FILE or --heuristic-detector".into(),
                    ))
                }
            };
            cmd_prepare(&cfg, &input, &source, &a.out, out)?;
            Ok(())
        }
        Command::Train(a) => {
            let mut flags = Vec::new();
            if let Some(s) = a.steps {
                flags.push(format!("train.steps={s}"));
            }
            if let Some(s) = a.seed {
                flags.push(format!("train.seed={s}"));
            }
            let cfg = load_config(&a.common, flags)?;
            let shards = a
                .shards
                .or_else(|| (!cfg.data.shards.is_empty()).then(|| cfg.data.shards.clone().into()))
                .ok_or_else(|| CliError::Usage("train needs --shards or data.shards".into()))?;
            let manifest = cmd_train(&cfg, &shards, &a.run_dir, out)?;
            match manifest.aborted {
                Some(msg) => Err(CliError::Numeric(format!("training aborted: {msg}"))),
                None => Ok(()),
            }
        }
        Command::Generate(a) => {
            let mut flags = Vec::new();
            if let Some(m) = a.mode {
                flags.push(format!("generate.mode={}", quoted(m.as_str())));
            }
            if let Some(p) = a.psi {
                flags.push(format!("truncation.psi={p:?}"));
            }
            if let Some(v) = a.psi_values {
                flags.push(format!("generate.psi_values={v:?}"));
            }
            if let Some(s) = a.seed {
                flags.push(format!("generate.seed={s}"));
            }
            if let Some(s) = a.noise_seed {
                flags.push(format!("generate.noise_seed={s}"));
            }
            let cfg = load_config(&a.common, flags)?;
            cmd_generate(&cfg, &a.snapshot, &a.out, out, err)?;
            Ok(())
        }
        Command::Eval(a) => {
            let mut flags = Vec::new();
            if let Some(m) = a.metrics {
                let list: Vec<String> = m.iter().map(|s| quoted(s.trim())).collect();
                flags.push(format!("metrics.list=[{}]", list.join(",")));
            }
            if let Some(e) = a.embedder {
                flags.push(format!("metrics.embedder={}", quoted(&e)));
            }
            if let Some(s) = a.shards {
                flags.push(format!("data.shards={}", quoted(&s.to_string_lossy())));
            }
            if let Some(l) = a.labels {
                flags.push(format!("data.labels={}", quoted(&l.to_string_lossy())));
            }
            let cfg = load_config(&a.common, flags)?;
            cmd_eval(&cfg, &a.snapshot, &a.out, out)?;
            Ok(())
        }
    }
}

/// Runs the command line `args` (including the program name) and returns the
/// process exit code, writing normal output to `out` and diagnostics to `err`.
pub fn run_with<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// [`run_with`] on the process's stdout and stderr.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
