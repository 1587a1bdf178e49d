use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MetricError;
use crate::data::{shard_tensor, ShardSet};
use crate::model::{sample_latents, Generator, NoiseConfig};
use crate::tensor::{Element, Tensor};

/// Independent 64-bit seed for item `i` of a seeded family.
pub fn derive_seed(seed: u64, i: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng.next_u64()
}

/// A generator seen by the metrics: z → w mapping and w → image rendering with
/// one noise seed per sample.
pub trait LatentGenerator: Sync {
    fn z_dim(&self) -> usize;
    /// `[n, d_z]` → `[n, d_w]`.
    fn map_z(&self, z: &Tensor<f64>) -> Result<Tensor<f64>, MetricError>;
    /// `[n, d_w]` → `[n, …]` images; identical `(w, seed)` pairs give identical images.
    fn render(&self, w: &Tensor<f64>, noise_seeds: &[u64]) -> Result<Tensor<f64>, MetricError>;
}

impl<T: Element> LatentGenerator for Generator<T> {
    fn z_dim(&self) -> usize {
        Generator::z_dim(self)
    }

    fn map_z(&self, z: &Tensor<f64>) -> Result<Tensor<f64>, MetricError> {
        Ok(self.map_latent(&z.cast())?.cast())
    }

    fn render(&self, w: &Tensor<f64>, noise_seeds: &[u64]) -> Result<Tensor<f64>, MetricError> {
        let styles = self.layer_styles(&w.cast(), None)?;
        let noise = NoiseConfig::all_from_sample_seeds(noise_seeds.to_vec());
        Ok(self.synthesize(&styles, &noise)?.cast())
    }
}

/// Ignores its latent: every sample is `image`.
#[derive(Debug, Clone)]
pub struct ConstantGenerator {
    pub z_dim: usize,
    /// One image, `[1, …]`.
    pub image: Tensor<f64>,
}

impl LatentGenerator for ConstantGenerator {
    fn z_dim(&self) -> usize {
        self.z_dim
    }

    fn map_z(&self, z: &Tensor<f64>) -> Result<Tensor<f64>, MetricError> {
        Ok(z.clone())
    }

    fn render(&self, w: &Tensor<f64>, _: &[u64]) -> Result<Tensor<f64>, MetricError> {
        let n = w.shape()[0];
        let parts = vec![self.image.clone(); n];
        Ok(Tensor::concat_outer(&parts)?)
    }
}

/// Identity mapping; the image of `w` is `gain · w` shaped `[n, 1, 1, d]`.
#[derive(Debug, Clone, Copy)]
pub struct LinearGenerator {
    pub z_dim: usize,
    pub gain: f64,
}

impl LatentGenerator for LinearGenerator {
    fn z_dim(&self) -> usize {
        self.z_dim
    }

    fn map_z(&self, z: &Tensor<f64>) -> Result<Tensor<f64>, MetricError> {
        Ok(z.clone())
    }

    fn render(&self, w: &Tensor<f64>, _: &[u64]) -> Result<Tensor<f64>, MetricError> {
        let s = w.shape();
        Ok(w.map(|v| self.gain * v).reshape(&[s[0], 1, 1, s[1]])?)
    }
}

/// A deterministic stream of images for distribution metrics.
pub trait ImageSource: Sync {
    /// Feeds `n` samples determined by `seed` to `sink` in chunks of at most
    /// `chunk`; returns whether sampling had to use replacement.
    fn stream(
        &self,
        n: usize,
        seed: u64,
        chunk: usize,
        sink: &mut dyn FnMut(Tensor<f64>) -> Result<(), MetricError>,
    ) -> Result<bool, MetricError>;
}

/// Untruncated samples of a generator: latent row `i` and noise seed `i` derive from `seed`.
pub struct GeneratorSource<'a> {
    pub generator: &'a dyn LatentGenerator,
}

impl ImageSource for GeneratorSource<'_> {
    fn stream(
        &self,
        n: usize,
        seed: u64,
        chunk: usize,
        sink: &mut dyn FnMut(Tensor<f64>) -> Result<(), MetricError>,
    ) -> Result<bool, MetricError> {
        let d = self.generator.z_dim();
        let z = sample_latents::<f64>(n, d, seed);
        let noise_seed = derive_seed(seed, u64::MAX);
        let mut start = 0;
        while start < n {
            let count = chunk.min(n - start);
            let w = self.generator.map_z(&z.slice_outer(start, count)?)?;
            let seeds: Vec<u64> = (start..start + count).map(|i| derive_seed(noise_seed, i as u64)).collect();
            sink(self.generator.render(&w, &seeds)?)?;
            start += count;
        }
        Ok(false)
    }
}

/// Records of a shard set, drawn without replacement when there are enough.
pub struct ShardSource<'a> {
    pub shards: &'a ShardSet,
}

impl ShardSource<'_> {
    pub fn indices(&self, n: usize, seed: u64) -> Result<(Vec<usize>, bool), MetricError> {
        let len = self.shards.len();
        if len == 0 {
            return Err(MetricError::Input("shard set is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(if n <= len {
            (index::sample(&mut rng, len, n).into_vec(), false)
        } else {
            ((0..n).map(|_| rng.random_range(0..len)).collect(), true)
        })
    }
}

impl ImageSource for ShardSource<'_> {
    fn stream(
        &self,
        n: usize,
        seed: u64,
        chunk: usize,
        sink: &mut dyn FnMut(Tensor<f64>) -> Result<(), MetricError>,
    ) -> Result<bool, MetricError> {
        let (idx, replaced) = self.indices(n, seed)?;
        for part in idx.chunks(chunk.max(1)) {
            sink(shard_tensor(self.shards, part)?)?;
        }
        Ok(replaced)
    }
}
