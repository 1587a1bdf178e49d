//! Adversarial training: logistic losses with R1, EMA generator, snapshots and
//! FID-based checkpoint selection.

mod checkpoint;
mod log;
mod losses;
mod trainer;

pub use checkpoint::{select_best_checkpoint, CheckpointScore};
pub use log::{read_train_log, LogRow, TrainLogWriter};
pub use losses::{d_loss, d_loss_value, g_loss, g_loss_value, r1_from_scores, r1_penalty};
pub use trainer::{
    discriminator_from_snapshot, generator_from_snapshot, initial_generator, train_loop, train_loop_with, NullObserver,
    Snapshot, TrainObserver, TrainOutcome, SNAPSHOT_KIND,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::OptimError;
use crate::data::DataError;
use crate::metrics::MetricError;
use crate::model::ModelError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch: usize,
    pub steps: u64,
    /// R1 weight; `None` picks 1 for resolutions ≤ 32 and 10 above.
    pub r1_gamma: Option<f64>,
    pub mixing_prob: f64,
    pub ema_decay: f64,
    pub snapshot_every: u64,
    /// Samples per side for the checkpoint FID.
    pub fid_n: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_g: 0.0025,
            lr_d: 0.0025,
            beta1: 0.0,
            beta2: 0.99,
            batch: 16,
            steps: 2000,
            r1_gamma: None,
            mixing_prob: 0.9,
            ema_decay: 0.995,
            snapshot_every: 500,
            fid_n: 2000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if self.batch < 2 {
            return bad("batch must be ≥ 2");
        }
        if let Some(g) = self.r1_gamma {
            if !(g >= 0.0) {
                return bad("r1_gamma must be ≥ 0");
            }
        }
        if !(0.0..=1.0).contains(&self.mixing_prob) {
            return bad("mixing_prob must lie in [0,1]");
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad("ema_decay must lie in [0,1)");
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be positive");
        }
        if self.fid_n < 2 {
            return bad("fid_n must be ≥ 2");
        }
        if !(self.lr_g > 0.0 && self.lr_d > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0,1)");
        }
        Ok(())
    }

    pub fn gamma_for(&self, resolution: usize) -> f64 {
        self.r1_gamma
            .unwrap_or(if resolution <= 32 { 1.0 } else { 10.0 })
    }
}
