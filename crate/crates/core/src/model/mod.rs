//! Style-based generator, mirrored discriminator, truncation and snapshots.

mod discriminator;
mod generator;
pub mod noise;
pub(crate) mod params;
pub mod snapshot;
pub mod truncation;

pub use discriminator::Discriminator;
pub use generator::{adain, inject_noise, sample_latents, style_mixing, Generator};
pub use noise::{NoiseConfig, NoiseMode, NoiseSource};
pub use params::ParamStore;
pub use snapshot::{SnapshotFile, SnapshotHeader};
pub use truncation::{truncate, TruncationConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("expected {expected} style vectors, got {got}")]
    StyleCount { expected: usize, got: usize },
    #[error("latent dimension {got} does not match model dimension {expected}")]
    LatentDim { expected: usize, got: usize },
    #[error("image shape {got:?} does not match model shape {expected:?}")]
    ImageShape {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("snapshot format error: {0}")]
    Format(String),
    #[error("snapshot i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Architecture knobs shared by the generator and the discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Output resolution R (power of two, ≥ 4).
    pub resolution: usize,
    /// Dimension of z and w.
    pub z_dim: usize,
    pub mapping_depth: usize,
    pub mapping_lr_mul: f64,
    /// Channels at 4×4; halved per doubling of resolution.
    pub base_channels: usize,
    pub min_channels: usize,
    pub layers_per_resolution: usize,
    /// Initial per-channel noise strength.
    pub noise_strength_init: f64,
    pub leaky_alpha: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            resolution: 32,
            z_dim: 64,
            mapping_depth: 4,
            mapping_lr_mul: 0.01,
            base_channels: 64,
            min_channels: 8,
            layers_per_resolution: 1,
            noise_strength_init: 0.0,
            leaky_alpha: 0.2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let r = self.resolution;
        if r < 4 || !r.is_power_of_two() {
            return Err(ModelError::Config(format!(
                "resolution {r} must be a power of two ≥ 4"
            )));
        }
        if self.z_dim == 0 {
            return Err(ModelError::Config("z_dim must be positive".into()));
        }
        if !(1..=2).contains(&self.layers_per_resolution) {
            return Err(ModelError::Config(
                "layers_per_resolution must be 1 or 2".into(),
            ));
        }
        if self.base_channels == 0 || self.min_channels == 0 {
            return Err(ModelError::Config("channel counts must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.leaky_alpha) {
            return Err(ModelError::Config("leaky_alpha must be in [0,1)".into()));
        }
        if self.mapping_lr_mul <= 0.0 {
            return Err(ModelError::Config("mapping_lr_mul must be positive".into()));
        }
        Ok(())
    }

    /// Resolutions 4, 8, …, R.
    pub fn resolutions(&self) -> Vec<usize> {
        let mut v = vec![];
        let mut r = 4;
        while r <= self.resolution {
            v.push(r);
            r *= 2;
        }
        v
    }

    pub fn channels_at(&self, resolution: usize) -> usize {
        let doublings = (resolution / 4).trailing_zeros();
        (self.base_channels >> doublings).max(self.min_channels)
    }

    /// Resolution of every synthesis layer, in order.
    pub fn layer_resolutions(&self) -> Vec<usize> {
        self.resolutions()
            .into_iter()
            .flat_map(|r| std::iter::repeat_n(r, self.layers_per_resolution))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_defaults() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!(c.layer_resolutions(), vec![4, 8, 16, 32]);
        assert_eq!(c.channels_at(4), 64);
        assert_eq!(c.channels_at(32), 8);
    }

    #[test]
    fn full_resolution_is_a_supported_configuration() {
        let c = ModelConfig {
            resolution: 256,
            layers_per_resolution: 2,
            ..Default::default()
        };
        c.validate().unwrap();
        assert_eq!(c.layer_resolutions().len(), 14);
        assert_eq!(*c.layer_resolutions().last().unwrap(), 256);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let c = ModelConfig {
            resolution: 24,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
