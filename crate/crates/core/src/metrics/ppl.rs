use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{lerp, slerp, Embedder, LatentGenerator, MetricError, Space};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// `t ~ U(0, 1)`.
    Full,
    /// `t = 0`.
    End,
}

impl Sampling {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sampling::Full => "full",
            Sampling::End => "end",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PplConfig {
    pub space: Space,
    pub sampling: Sampling,
    pub epsilon: f64,
    pub n_pairs: usize,
    pub seed: u64,
    pub batch: usize,
}

impl PplConfig {
    pub fn new(space: Space, sampling: Sampling, n_pairs: usize, seed: u64) -> Self {
        PplConfig {
            space,
            sampling,
            epsilon: 1e-4,
            n_pairs,
            seed,
            batch: 64,
        }
    }

    /// Report name such as `ppl_zfull`.
    pub fn metric_name(&self) -> String {
        format!("ppl_{}{}", self.space.as_str(), self.sampling.as_str())
    }
}

/// Path endpoints (in the configured space), position and the shared noise seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PplPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub t: f64,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PplResult {
    pub name: String,
    pub value: f64,
    pub n_pairs: usize,
    pub embedder: String,
}

fn rows(t: &Tensor<f64>) -> Vec<Vec<f64>> {
    let d = t.shape()[1];
    t.data().chunks(d).map(<[f64]>::to_vec).collect()
}

fn stack(rows: &[Vec<f64>]) -> Result<Tensor<f64>, MetricError> {
    let d = rows[0].len();
    Ok(Tensor::new(&[rows.len(), d], rows.concat())?)
}

/// Per-pair `d(e(G(i(t))), e(G(i(t+ε)))) / ε²` with `d` the squared Euclidean distance.
/// In Z the path is a slerp mapped through `G`'s mapping; in W it is a lerp.
pub fn ppl_on_pairs(
    generator: &dyn LatentGenerator,
    pairs: &[PplPair],
    space: Space,
    epsilon: f64,
    embedder: &dyn Embedder,
) -> Result<Vec<f64>, MetricError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(MetricError::Input(format!("epsilon must be positive, got {epsilon}")));
    }
    if pairs.is_empty() {
        return Ok(vec![]);
    }
    let mut lat = Vec::with_capacity(2 * pairs.len());
    for p in pairs {
        let (x0, x1) = match space {
            Space::Z => (slerp(&p.a, &p.b, p.t)?, slerp(&p.a, &p.b, p.t + epsilon)?),
            Space::W => (lerp(&p.a, &p.b, p.t), lerp(&p.a, &p.b, p.t + epsilon)),
        };
        lat.push(x0);
        lat.push(x1);
    }
    let lat = stack(&lat)?;
    let w = match space {
        Space::Z => generator.map_z(&lat)?,
        Space::W => lat,
    };
    let seeds: Vec<u64> = pairs.iter().flat_map(|p| [p.noise_seed, p.noise_seed]).collect();
    let images = generator.render(&w, &seeds)?;
    let feats = embedder.embed(&images)?;
    let scale = 1.0 / (epsilon * epsilon);
    Ok((0..pairs.len())
        .map(|i| (feats.row(2 * i) - feats.row(2 * i + 1)).norm_squared() * scale)
        .collect())
}

/// Mean perceptual path length over `n_pairs` seeded pairs.
pub fn ppl(
    generator: &dyn LatentGenerator,
    cfg: &PplConfig,
    embedder: &dyn Embedder,
) -> Result<PplResult, MetricError> {
    if cfg.n_pairs == 0 {
        return Err(MetricError::Input("ppl needs at least one pair".into()));
    }
    let d = generator.z_dim();
    let mut total = 0.0;
    let mut start = 0;
    while start < cfg.n_pairs {
        let count = cfg.batch.max(1).min(cfg.n_pairs - start);
        let mut pairs = Vec::with_capacity(count);
        let mut z = Vec::with_capacity(2 * count);
        for i in start..start + count {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let z0: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let z1: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let t = match cfg.sampling {
                Sampling::Full => rng.random::<f64>(),
                Sampling::End => 0.0,
            };
            let noise_seed = rng.next_u64();
            z.push(z0);
            z.push(z1);
            pairs.push(PplPair { a: vec![], b: vec![], t, noise_seed });
        }
        let ends = match cfg.space {
            Space::Z => z,
            Space::W => rows(&generator.map_z(&stack(&z)?)?),
        };
        for (p, e) in pairs.iter_mut().zip(ends.chunks(2)) {
            p.a = e[0].clone();
            p.b = e[1].clone();
        }
        for v in ppl_on_pairs(generator, &pairs, cfg.space, cfg.epsilon, embedder)? {
            total += v;
        }
        start += count;
    }
    let value = total / cfg.n_pairs as f64;
    if !value.is_finite() {
        return Err(MetricError::Numeric(format!("{} is not finite", cfg.metric_name())));
    }
    Ok(PplResult {
        name: cfg.metric_name(),
        value,
        n_pairs: cfg.n_pairs,
        embedder: embedder.name().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ConstantGenerator, IdentityEmbedder, LinearGenerator};

    #[test]
    fn doubled_line_has_length_four() {
        let g = LinearGenerator { z_dim: 1, gain: 2.0 };
        let pair = PplPair { a: vec![0.0], b: vec![1.0], t: 0.3, noise_seed: 0 };
        let v = ppl_on_pairs(&g, &[pair], Space::W, 1e-4, &IdentityEmbedder).unwrap();
        assert!((v[0] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn constant_generator_has_zero_length() {
        let g = ConstantGenerator { z_dim: 3, image: Tensor::ones(&[1, 3, 2, 2]) };
        for sampling in [Sampling::Full, Sampling::End] {
            let r = ppl(&g, &PplConfig::new(Space::Z, sampling, 5, 1), &IdentityEmbedder).unwrap();
            assert_eq!(r.value, 0.0);
        }
    }

    #[test]
    fn non_positive_epsilon_is_rejected() {
        let g = LinearGenerator { z_dim: 1, gain: 1.0 };
        let mut cfg = PplConfig::new(Space::W, Sampling::End, 1, 0);
        cfg.epsilon = 0.0;
        assert!(ppl(&g, &cfg, &IdentityEmbedder).is_err());
    }

    #[test]
    fn names() {
        assert_eq!(PplConfig::new(Space::Z, Sampling::Full, 1, 0).metric_name(), "ppl_zfull");
        assert_eq!(PplConfig::new(Space::W, Sampling::End, 1, 0).metric_name(), "ppl_wend");
    }
}
