//! Per-layer noise inputs and the layer masks used for noise ablations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::tensor::{Element, Tensor};

/// Coarse layers are those at or below this resolution (4² through 32²).
pub const DEFAULT_COARSE_MAX_RESOLUTION: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    All,
    None,
    FineOnly,
    CoarseOnly,
    Mask(Vec<bool>),
}

/// Where noise planes come from.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource {
    /// One seed per layer; sample `i` of layer `l` draws from stream `i` of `seeds[l]`.
    LayerSeeds(Vec<u64>),
    /// One seed per sample; layer `l` of sample `i` draws from stream `l` of `seeds[i]`.
    SampleSeeds(Vec<u64>),
    /// Concrete `[n,1,h,w]` tensors, one per layer.
    Explicit(Vec<Tensor<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub mode: NoiseMode,
    pub source: NoiseSource,
    pub coarse_max_resolution: usize,
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        NoiseConfig {
            mode: NoiseMode::None,
            source: NoiseSource::LayerSeeds(vec![]),
            coarse_max_resolution: DEFAULT_COARSE_MAX_RESOLUTION,
        }
    }

    pub fn all_from_layer_seeds(seeds: Vec<u64>) -> Self {
        NoiseConfig {
            mode: NoiseMode::All,
            source: NoiseSource::LayerSeeds(seeds),
            coarse_max_resolution: DEFAULT_COARSE_MAX_RESOLUTION,
        }
    }

    pub fn all_from_sample_seeds(seeds: Vec<u64>) -> Self {
        NoiseConfig {
            mode: NoiseMode::All,
            source: NoiseSource::SampleSeeds(seeds),
            coarse_max_resolution: DEFAULT_COARSE_MAX_RESOLUTION,
        }
    }

    pub fn with_mode(mut self, mode: NoiseMode) -> Self {
        self.mode = mode;
        self
    }

    /// Which layers receive noise, given each layer's resolution.
    pub fn mask(&self, layer_resolutions: &[usize]) -> Result<Vec<bool>, ModelError> {
        let boundary = self.coarse_max_resolution;
        Ok(match &self.mode {
            NoiseMode::All => vec![true; layer_resolutions.len()],
            NoiseMode::None => vec![false; layer_resolutions.len()],
            NoiseMode::CoarseOnly => layer_resolutions.iter().map(|&r| r <= boundary).collect(),
            NoiseMode::FineOnly => layer_resolutions.iter().map(|&r| r > boundary).collect(),
            NoiseMode::Mask(m) => {
                if m.len() != layer_resolutions.len() {
                    return Err(ModelError::Config(format!(
                        "noise mask has {} entries for {} layers",
                        m.len(),
                        layer_resolutions.len()
                    )));
                }
                m.clone()
            }
        })
    }

    /// Noise tensors `[batch,1,r,r]` for enabled layers, `None` for disabled ones.
    /// Disabled layers never read their seeds.
    pub fn resolve<T: Element>(
        &self,
        layer_resolutions: &[usize],
        batch: usize,
    ) -> Result<Vec<Option<Tensor<T>>>, ModelError> {
        let mask = self.mask(layer_resolutions)?;
        let mut out = Vec::with_capacity(mask.len());
        for (l, (&on, &res)) in mask.iter().zip(layer_resolutions).enumerate() {
            if !on {
                out.push(None);
                continue;
            }
            let plane = res * res;
            let t = match &self.source {
                NoiseSource::LayerSeeds(seeds) => {
                    let seed = *seeds.get(l).ok_or_else(|| missing("layer seed", l))?;
                    let mut data = Vec::with_capacity(batch * plane);
                    for i in 0..batch {
                        data.extend(noise_plane::<T>(seed, i as u64, plane));
                    }
                    Tensor::new(&[batch, 1, res, res], data)?
                }
                NoiseSource::SampleSeeds(seeds) => {
                    if seeds.len() != batch {
                        return Err(ModelError::Config(format!(
                            "{} sample noise seeds for batch of {batch}",
                            seeds.len()
                        )));
                    }
                    let mut data = Vec::with_capacity(batch * plane);
                    for &s in seeds {
                        data.extend(noise_plane::<T>(s, l as u64, plane));
                    }
                    Tensor::new(&[batch, 1, res, res], data)?
                }
                NoiseSource::Explicit(tensors) => {
                    let t = tensors.get(l).ok_or_else(|| missing("explicit noise tensor", l))?;
                    if t.shape() != [batch, 1, res, res] {
                        return Err(ModelError::Tensor(crate::tensor::shape_err(
                            "explicit noise",
                            t.shape(),
                            &[batch, 1, res, res],
                        )));
                    }
                    t.cast()
                }
            };
            out.push(Some(t));
        }
        Ok(out)
    }
}

fn missing(what: &str, layer: usize) -> ModelError {
    ModelError::Config(format!("missing {what} for layer {layer}"))
}

/// Standard-normal values from stream `stream` of `seed`.
pub fn noise_plane<T: Element>(seed: u64, stream: u64, len: usize) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..len)
        .map(|_| T::lit(StandardNormal.sample(&mut rng)))
        .collect()
}
