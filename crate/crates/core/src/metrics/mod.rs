//! FID, perceptual path length and linear separability over pluggable embedders.

mod classifier;
mod embed;
mod fid;
mod gaussian;
mod interp;
mod ppl;
mod report;
mod separability;
mod sources;

pub use classifier::{AttributeClassifier, ClassifierConfig, ClassifierOracle};
pub use embed::{Embedder, IdentityEmbedder, PixelEmbedder};
pub use fid::{fid, FidResult};
pub use gaussian::{fit_gaussian, frechet_distance, matrix_sqrt_psd, GaussianStats, EIG_CLIP};
pub use interp::{lerp, slerp};
pub use ppl::{ppl, ppl_on_pairs, PplConfig, PplPair, PplResult, Sampling};
pub use report::{read_metric_csv, write_metric_csv, MetricRow};
pub use separability::{
    conditional_entropy, linear_separability, AttributeOracle, LatentCoordinateOracle, LsResult, OracleBatch,
    OracleLabel, RandomOracle, SeparabilityConfig,
};
pub use sources::{
    derive_seed, ConstantGenerator, GeneratorSource, ImageSource, LatentGenerator, LinearGenerator, ShardSource,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::model::ModelError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Latent space a metric operates in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Z,
    W,
}

impl Space {
    pub fn as_str(&self) -> &'static str {
        match self {
            Space::Z => "z",
            Space::W => "w",
        }
    }
}
