use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::noise::NoiseConfig;
use super::params::{EqConv, EqDense, ParamStore};
use super::truncation::{truncate, TruncationConfig};
use super::{ModelConfig, ModelError};
use crate::autodiff::{Tape, Var};
use crate::tensor::{Element, Tensor, TensorError};

const NORM_EPS: f64 = 1e-8;
const ADAIN_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
struct SynthLayer {
    resolution: usize,
    upsample: bool,
    conv: EqConv,
    noise_strength: usize,
    style_scale: EqDense,
    style_bias: EqDense,
}

/// Mapping network plus synthesis network.
///
/// Each synthesis layer runs: optional 2× upsample → 3×3 conv → noise
/// injection → leaky relu → AdaIN driven by that layer's style vector.
#[derive(Debug, Clone)]
pub struct Generator<T: Element = f32> {
    cfg: ModelConfig,
    params: ParamStore<T>,
    mapping: Vec<EqDense>,
    const_input: usize,
    layers: Vec<SynthLayer>,
    to_rgb: EqConv,
}

impl<T: Element> Generator<T> {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let d = cfg.z_dim;
        let gain = 2f64.sqrt();

        let mapping = (0..cfg.mapping_depth)
            .map(|i| {
                EqDense::new(
                    &mut params,
                    &format!("mapping.{i}"),
                    d,
                    d,
                    gain,
                    cfg.mapping_lr_mul,
                    0.0,
                    &mut rng,
                )
            })
            .collect();

        let c0 = cfg.channels_at(4);
        let const_input = params.add("synthesis.const", Tensor::ones(&[1, c0, 4, 4]));

        let mut layers = Vec::new();
        let mut in_ch = c0;
        for (i, &res) in cfg.layer_resolutions().iter().enumerate() {
            let out_ch = cfg.channels_at(res);
            let upsample = res > 4 && (i == 0 || cfg.layer_resolutions()[i - 1] != res);
            let name = format!("synthesis.{i}");
            let conv = EqConv::new(&mut params, &format!("{name}.conv"), in_ch, out_ch, 3, gain, &mut rng);
            let noise_strength = params.add(
                format!("{name}.noise_strength"),
                Tensor::full(&[out_ch], T::lit(cfg.noise_strength_init)),
            );
            let style_scale = EqDense::new(
                &mut params,
                &format!("{name}.style_scale"),
                d,
                out_ch,
                1.0,
                1.0,
                1.0,
                &mut rng,
            );
            let style_bias = EqDense::new(
                &mut params,
                &format!("{name}.style_bias"),
                d,
                out_ch,
                1.0,
                1.0,
                0.0,
                &mut rng,
            );
            layers.push(SynthLayer {
                resolution: res,
                upsample,
                conv,
                noise_strength,
                style_scale,
                style_bias,
            });
            in_ch = out_ch;
        }
        let to_rgb = EqConv::new(&mut params, "synthesis.to_rgb", in_ch, 3, 1, 1.0, &mut rng);

        Ok(Generator {
            cfg: cfg.clone(),
            params,
            mapping,
            const_input,
            layers,
            to_rgb,
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

    pub fn z_dim(&self) -> usize {
        self.cfg.z_dim
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_resolutions(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.resolution).collect()
    }

    pub fn image_shape(&self, n: usize) -> [usize; 4] {
        [n, 3, self.cfg.resolution, self.cfg.resolution]
    }

    pub fn cast<U: Element>(&self) -> Generator<U> {
        Generator {
            cfg: self.cfg.clone(),
            params: self.params.cast(),
            mapping: self.mapping.clone(),
            const_input: self.const_input,
            layers: self.layers.clone(),
            to_rgb: self.to_rgb.clone(),
        }
    }

    /// `w = MLP(z / sqrt(mean(z²) + 1e-8))` on a `[n, d_z]` batch.
    pub fn map_latent_var<'t>(
        &self,
        p: &[Var<'t, T>],
        z: Var<'t, T>,
    ) -> Result<Var<'t, T>, ModelError> {
        let shape = z.shape();
        if shape.len() != 2 || shape[1] != self.cfg.z_dim {
            return Err(ModelError::LatentDim {
                expected: self.cfg.z_dim,
                got: *shape.last().unwrap_or(&0),
            });
        }
        let n = shape[0];
        let inv = z
            .square()?
            .sum_to(&[n, 1])?
            .scale(1.0 / self.cfg.z_dim as f64)
            .add_scalar(NORM_EPS)
            .powf(-0.5)
            .broadcast_to(&shape)?;
        let mut x = z.mul(inv)?;
        for layer in &self.mapping {
            x = layer.forward(p, x)?.leaky_relu(self.cfg.leaky_alpha);
        }
        Ok(x)
    }

    /// Renders `[n,3,R,R]` images from one `[n,d_w]` style per layer.
    /// `noise[l]` is `None` for layers whose noise input is disabled.
    pub fn synthesize_var<'t>(
        &self,
        p: &[Var<'t, T>],
        styles: &[Var<'t, T>],
        noise: &[Option<Tensor<T>>],
    ) -> Result<Var<'t, T>, ModelError> {
        if styles.len() != self.layers.len() {
            return Err(ModelError::StyleCount {
                expected: self.layers.len(),
                got: styles.len(),
            });
        }
        if noise.len() != self.layers.len() {
            return Err(ModelError::Config(format!(
                "{} noise inputs for {} layers",
                noise.len(),
                self.layers.len()
            )));
        }
        let n = styles[0].shape()[0];
        let tape = styles[0].tape();
        let c0 = self.cfg.channels_at(4);
        let mut x = p[self.const_input].broadcast_to(&[n, c0, 4, 4])?;
        for ((layer, &style), noise) in self.layers.iter().zip(styles).zip(noise) {
            if style.shape() != [n, self.cfg.z_dim] {
                return Err(ModelError::LatentDim {
                    expected: self.cfg.z_dim,
                    got: *style.shape().last().unwrap_or(&0),
                });
            }
            if layer.upsample {
                x = x.upsample2x()?;
            }
            x = layer.conv.forward(p, x)?;
            if let Some(nz) = noise {
                x = inject_noise(x, tape.leaf(nz.clone()), p[layer.noise_strength])?;
            }
            x = x.leaky_relu(self.cfg.leaky_alpha);
            let s = layer.style_scale.forward(p, style)?;
            let b = layer.style_bias.forward(p, style)?;
            x = adain(x, s, b)?;
        }
        Ok(self.to_rgb.forward(p, x)?)
    }

    pub fn map_latent(&self, z: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let tape = Tape::new();
        let p = self.params.bind(&tape);
        let w = self.map_latent_var(&p, tape.leaf(z.clone()))?;
        Ok((*w.value()).clone())
    }

    /// Mean of `map_latent` over `n` standard-normal draws from `seed`.
    pub fn mean_w(&self, n: usize, seed: u64) -> Result<Tensor<T>, ModelError> {
        if n == 0 {
            return Err(ModelError::Config("mean_w needs n ≥ 1".into()));
        }
        const CHUNK: usize = 1024;
        let d = self.cfg.z_dim;
        let z = sample_latents::<T>(n, d, seed);
        let mut acc = vec![0f64; d];
        let mut start = 0;
        while start < n {
            let count = CHUNK.min(n - start);
            let w = self.map_latent(&z.slice_outer(start, count)?)?;
            for row in w.data().chunks(d) {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v.as_f64();
                }
            }
            start += count;
        }
        let mean: Vec<f64> = acc.iter().map(|a| a / n as f64).collect();
        Ok(Tensor::from_f64_slice(&[d], &mean)?)
    }

    /// Per-layer styles for `w`, truncated layer by layer when `trunc` is given.
    pub fn layer_styles(
        &self,
        w: &Tensor<T>,
        trunc: Option<&TruncationConfig<T>>,
    ) -> Result<Vec<Tensor<T>>, ModelError> {
        self.layers
            .iter()
            .map(|l| match trunc {
                Some(cfg) => truncate(w, cfg, l.resolution),
                None => Ok(w.clone()),
            })
            .collect()
    }

    pub fn synthesize(
        &self,
        styles: &[Tensor<T>],
        noise: &NoiseConfig,
    ) -> Result<Tensor<T>, ModelError> {
        let batch = styles.first().map(|s| s.shape()[0]).unwrap_or(0);
        let resolved = noise.resolve::<T>(&self.layer_resolutions(), batch.max(1))?;
        self.synthesize_with(styles, &resolved)
    }

    pub fn synthesize_with(
        &self,
        styles: &[Tensor<T>],
        noise: &[Option<Tensor<T>>],
    ) -> Result<Tensor<T>, ModelError> {
        let tape = Tape::new();
        let p = self.params.bind(&tape);
        let s: Vec<_> = styles.iter().map(|t| tape.leaf(t.clone())).collect();
        let img = self.synthesize_var(&p, &s, noise)?;
        Ok((*img.value()).clone())
    }

    /// z → w → (truncation) → image.
    pub fn generate(
        &self,
        z: &Tensor<T>,
        trunc: Option<&TruncationConfig<T>>,
        noise: &NoiseConfig,
    ) -> Result<Tensor<T>, ModelError> {
        let w = self.map_latent(z)?;
        let styles = self.layer_styles(&w, trunc)?;
        self.synthesize(&styles, noise)
    }
}

/// `[n, d]` standard-normal latents; row `i` depends only on `(seed, i)`.
pub fn sample_latents<T: Element>(n: usize, d: usize, seed: u64) -> Tensor<T> {
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        data.extend(super::noise::noise_plane::<T>(seed, i as u64, d));
    }
    Tensor::from_parts(vec![n.max(1), d], data)
}

/// Adaptive instance normalization: per sample and channel,
/// `y = scale·(x − μ)/sqrt(σ² + ε) + bias`. `scale` and `bias` are `[n, c]`.
pub fn adain<'t, T: Element>(
    x: Var<'t, T>,
    scale: Var<'t, T>,
    bias: Var<'t, T>,
) -> Result<Var<'t, T>, TensorError> {
    let shape = x.shape();
    if shape.len() != 4 {
        return Err(TensorError::Contract(format!(
            "adain expects [n,c,h,w], got {shape:?}"
        )));
    }
    let (n, c) = (shape[0], shape[1]);
    let stat = [n, c, 1, 1];
    let inv_hw = 1.0 / (shape[2] * shape[3]) as f64;
    let mu = x.sum_to(&stat)?.scale(inv_hw).broadcast_to(&shape)?;
    let centered = x.sub(mu)?;
    let inv_std = centered
        .square()?
        .sum_to(&stat)?
        .scale(inv_hw)
        .add_scalar(ADAIN_EPS)
        .powf(-0.5)
        .broadcast_to(&shape)?;
    let s = scale.reshape(&stat)?.broadcast_to(&shape)?;
    let b = bias.reshape(&stat)?.broadcast_to(&shape)?;
    centered.mul(inv_std)?.mul(s)?.add(b)
}

/// `y[n,c,h,w] = x[n,c,h,w] + strength[c]·noise[n,0,h,w]`.
pub fn inject_noise<'t, T: Element>(
    x: Var<'t, T>,
    noise: Var<'t, T>,
    strength: Var<'t, T>,
) -> Result<Var<'t, T>, TensorError> {
    let shape = x.shape();
    let ns = noise.shape();
    if shape.len() != 4 || ns != [shape[0], 1, shape[2], shape[3]] {
        return Err(crate::tensor::shape_err("inject_noise", &shape, &ns));
    }
    let ss = strength.shape();
    if ss != [shape[1]] {
        return Err(crate::tensor::shape_err("inject_noise strength", &shape, &ss));
    }
    let nb = noise.broadcast_to(&shape)?;
    let sb = strength.reshape(&[1, shape[1], 1, 1])?.broadcast_to(&shape)?;
    x.add(nb.mul(sb)?)
}

/// Layers `[0, crossover)` take `w1`, layers `[crossover, layers)` take `w2`.
pub fn style_mixing<S: Clone>(
    w1: &S,
    w2: &S,
    crossover: usize,
    layers: usize,
) -> Result<Vec<S>, ModelError> {
    if crossover > layers {
        return Err(ModelError::Config(format!(
            "crossover {crossover} outside 0..={layers}"
        )));
    }
    Ok((0..layers)
        .map(|i| if i < crossover { w1.clone() } else { w2.clone() })
        .collect())
}
