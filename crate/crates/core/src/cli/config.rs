use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::data::{DetectorConfig, FilterPolicy, ToyDatasetSpec};
use crate::metrics::ClassifierConfig;
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Shard directory or file used by `train` and `eval` when no flag is given.
    pub shards: String,
    /// Attribute label CSV for the classifier embedder/oracle.
    pub labels: String,
    pub shard_capacity: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { shards: String::new(), labels: String::new(), shard_capacity: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationSettings {
    pub psi: f64,
    pub cutoff_resolution: usize,
    /// Latents averaged for the mean style.
    pub mean_w_samples: usize,
    pub mean_w_seed: u64,
}

impl Default for TruncationSettings {
    fn default() -> Self {
        TruncationSettings { psi: 0.7, cutoff_resolution: 32, mean_w_samples: 4096, mean_w_seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum GenerateMode {
    Grid,
    TruncSweep,
    NoiseAblation,
}

impl GenerateMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GenerateMode::Grid => "grid",
            GenerateMode::TruncSweep => "trunc_sweep",
            GenerateMode::NoiseAblation => "noise_ablation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub mode: GenerateMode,
    pub rows: usize,
    pub cols: usize,
    /// ψ columns of a truncation sweep.
    pub psi_values: Vec<f64>,
    /// Latent rows of a sweep or ablation.
    pub latents: usize,
    pub seed: u64,
    pub noise_seed: u64,
    /// Render from the EMA generator rather than the raw one.
    pub use_ema: bool,
    /// Noise ablation: layers at or below this resolution count as coarse.
    pub coarse_max_resolution: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            mode: GenerateMode::Grid,
            rows: 4,
            cols: 4,
            psi_values: vec![1.0, 0.7, 0.5, 0.0],
            latents: 4,
            seed: 0,
            noise_seed: 1,
            use_ema: true,
            coarse_max_resolution: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub list: Vec<String>,
    /// `pixel` or `classifier`.
    pub embedder: String,
    pub fid_n: usize,
    pub ppl_pairs: usize,
    pub ppl_epsilon: f64,
    pub ls_samples: usize,
    pub ls_keep_fraction: f64,
    pub ls_steps: usize,
    /// `classifier` or `latent_coordinate`.
    pub ls_oracle: String,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            list: ["fid", "ppl_zfull", "ppl_wfull", "ppl_zend", "ppl_wend", "ls_z", "ls_w"]
                .map(String::from)
                .to_vec(),
            embedder: "pixel".into(),
            fid_n: 2000,
            ppl_pairs: 1000,
            ppl_epsilon: 1e-4,
            ls_samples: 2000,
            ls_keep_fraction: 0.5,
            ls_steps: 25,
            ls_oracle: "classifier".into(),
            seed: 0,
        }
    }
}

/// Complete configuration; every section and key has an explicit default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub toy: ToyDatasetSpec,
    pub prepare: FilterPolicy,
    pub detector: DetectorConfig,
    pub truncation: TruncationSettings,
    pub generate: GenerateConfig,
    pub metrics: MetricsConfig,
    pub classifier: ClassifierConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainConfig { r1_gamma: Some(TrainConfig::default().gamma_for(model.resolution)), ..Default::default() };
        RunConfig {
            toy: ToyDatasetSpec { resolution: model.resolution as u32, ..Default::default() },
            classifier: ClassifierConfig { resolution: model.resolution, ..Default::default() },
            prepare: FilterPolicy { out_size: model.resolution as u32, ..Default::default() },
            model,
            train,
            data: DataConfig::default(),
            detector: DetectorConfig::default(),
            truncation: TruncationSettings::default(),
            generate: GenerateConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

/// Parses `value` as a TOML literal, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

impl RunConfig {
    /// Loads `path` (if any), applies `section.key=value` overrides, and resolves
    /// resolution-dependent defaults.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?
                .parse::<toml::Table>()
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
            None => toml::Table::new(),
        };
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("override `{o}` is not section.key=value")))?;
            let (section, field) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| CliError::Usage(format!("override key `{key}` is not section.key")))?;
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(sec) = entry else {
                return Err(CliError::Usage(format!("`{section}` is not a section")));
            };
            sec.insert(field.to_string(), parse_value(value.trim()));
        }
        let explicit = |section: &str, key: &str| {
            table.get(section).and_then(|t| t.as_table()).is_some_and(|t| t.contains_key(key))
        };
        let (gamma_set, toy_set, classifier_set, crop_set) = (
            explicit("train", "r1_gamma"),
            explicit("toy", "resolution"),
            explicit("classifier", "resolution"),
            explicit("prepare", "out_size"),
        );
        let mut cfg: RunConfig = table.try_into().map_err(|e| CliError::Usage(format!("config: {e}")))?;
        let r = cfg.model.resolution;
        if !gamma_set {
            cfg.train.r1_gamma = Some(TrainConfig::default().gamma_for(r));
        }
        if !toy_set {
            cfg.toy.resolution = r as u32;
        }
        if !classifier_set {
            cfg.classifier.resolution = r;
        }
        if !crop_set {
            cfg.prepare.out_size = r as u32;
        }
        cfg.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        cfg.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the resolved TOML text, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
