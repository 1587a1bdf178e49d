use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{EqConv, EqDense, ParamStore};
use super::{ModelConfig, ModelError};
use crate::autodiff::{Tape, Var};
use crate::tensor::{Element, Tensor};

#[derive(Debug, Clone)]
struct DownBlock {
    conv: EqConv,
}

/// Mirror of the synthesis network without styles or noise:
/// from-RGB, then conv → leaky relu → 2× average pool per block down to 4×4,
/// then a dense head producing one logit per image.
#[derive(Debug, Clone)]
pub struct Discriminator<T: Element = f32> {
    cfg: ModelConfig,
    params: ParamStore<T>,
    from_rgb: EqConv,
    blocks: Vec<DownBlock>,
    final_conv: EqConv,
    fc: EqDense,
    out: EqDense,
}

impl<T: Element> Discriminator<T> {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let gain = 2f64.sqrt();
        let r = cfg.resolution;
        let from_rgb = EqConv::new(&mut params, "d.from_rgb", 3, cfg.channels_at(r), 1, gain, &mut rng);
        let mut blocks = Vec::new();
        let mut res = r;
        while res > 4 {
            let conv = EqConv::new(
                &mut params,
                &format!("d.block{res}"),
                cfg.channels_at(res),
                cfg.channels_at(res / 2),
                3,
                gain,
                &mut rng,
            );
            blocks.push(DownBlock { conv });
            res /= 2;
        }
        let c4 = cfg.channels_at(4);
        let final_conv = EqConv::new(&mut params, "d.final_conv", c4, c4, 3, gain, &mut rng);
        let fc = EqDense::new(&mut params, "d.fc", c4 * 16, c4, gain, 1.0, 0.0, &mut rng);
        let out = EqDense::new(&mut params, "d.out", c4, 1, 1.0, 1.0, 0.0, &mut rng);
        Ok(Discriminator {
            cfg: cfg.clone(),
            params,
            from_rgb,
            blocks,
            final_conv,
            fc,
            out,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn cast<U: Element>(&self) -> Discriminator<U> {
        Discriminator {
            cfg: self.cfg.clone(),
            params: self.params.cast(),
            from_rgb: self.from_rgb.clone(),
            blocks: self.blocks.clone(),
            final_conv: self.final_conv.clone(),
            fc: self.fc.clone(),
            out: self.out.clone(),
        }
    }

    /// Scores `[n,3,R,R]` images; returns `[n]` logits.
    pub fn forward<'t>(
        &self,
        p: &[Var<'t, T>],
        images: Var<'t, T>,
    ) -> Result<Var<'t, T>, ModelError> {
        let shape = images.shape();
        let r = self.cfg.resolution;
        if shape.len() != 4 || shape[1..] != [3, r, r] {
            return Err(ModelError::ImageShape {
                expected: vec![shape.first().copied().unwrap_or(0), 3, r, r],
                got: shape,
            });
        }
        let n = shape[0];
        let a = self.cfg.leaky_alpha;
        let mut x = self.from_rgb.forward(p, images)?.leaky_relu(a);
        for b in &self.blocks {
            x = b.conv.forward(p, x)?.leaky_relu(a).avg_pool2x()?;
        }
        x = self.final_conv.forward(p, x)?.leaky_relu(a);
        let c4 = self.cfg.channels_at(4);
        x = x.reshape(&[n, c4 * 16])?;
        x = self.fc.forward(p, x)?.leaky_relu(a);
        Ok(self.out.forward(p, x)?.reshape(&[n])?)
    }

    pub fn discriminate(&self, images: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let tape = Tape::new();
        let p = self.params.bind(&tape);
        let s = self.forward(&p, tape.leaf(images.clone()))?;
        Ok((*s.value()).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            resolution: 16,
            z_dim: 8,
            base_channels: 8,
            min_channels: 4,
            ..Default::default()
        }
    }

    #[test]
    fn one_finite_score_per_sample() {
        let d = Discriminator::<f32>::new(&cfg(), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::randn(&[5, 3, 16, 16], &mut rng);
        let s = d.discriminate(&x).unwrap();
        assert_eq!(s.shape(), &[5]);
        assert!(s.all_finite());
    }

    #[test]
    fn duplicated_sample_gets_duplicated_score() {
        let d = Discriminator::<f32>::new(&cfg(), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let one = Tensor::<f32>::randn(&[1, 3, 16, 16], &mut rng);
        let other = Tensor::<f32>::randn(&[1, 3, 16, 16], &mut rng);
        let batch = Tensor::concat_outer(&[one.clone(), other, one]).unwrap();
        let s = d.discriminate(&batch).unwrap();
        assert_eq!(s.data()[0].to_bits(), s.data()[2].to_bits());
    }

    #[test]
    fn wrong_resolution_is_rejected() {
        let d = Discriminator::<f32>::new(&cfg(), 0).unwrap();
        let x = Tensor::zeros(&[1, 3, 8, 8]);
        assert!(matches!(d.discriminate(&x), Err(ModelError::ImageShape { .. })));
    }
}
