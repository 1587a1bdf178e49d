//! Perceptual path length on an analytic generator and on a small random network.

use restyle::metrics::{ppl, ConstantGenerator, IdentityEmbedder, LinearGenerator, PixelEmbedder, PplConfig, Sampling, Space};
use restyle::model::{Generator, ModelConfig};
use restyle::Tensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 8;
    let lin = LinearGenerator { z_dim: d, gain: 3.0 };
    for space in [Space::Z, Space::W] {
        for sampling in [Sampling::Full, Sampling::End] {
            let cfg = PplConfig::new(space, sampling, 2000, 1);
            let r = ppl(&lin, &cfg, &IdentityEmbedder)?;
            println!("linear gain 3 {}: {:.6}", cfg.metric_name(), r.value);
        }
    }
    // W-space lerp on a linear map: each pair scores gain² |a - b|², whose expectation is 9 · 2d.
    println!("expected wfull/wend value: {}", 9.0 * 2.0 * d as f64);

    let constant = ConstantGenerator { z_dim: d, image: Tensor::zeros(&[1, 3, 4, 4]) };
    println!("constant generator: {}", ppl(&constant, &PplConfig::new(Space::Z, Sampling::Full, 100, 0), &PixelEmbedder)?.value);

    let g = Generator::<f32>::new(&ModelConfig { resolution: 16, z_dim: 16, base_channels: 16, min_channels: 8, ..Default::default() }, 2)?;
    for space in [Space::Z, Space::W] {
        let cfg = PplConfig::new(space, Sampling::Full, 200, 0);
        println!("random network {}: {:.3}", cfg.metric_name(), ppl(&g, &cfg, &PixelEmbedder)?.value);
    }
    Ok(())
}
