//! FID with the pixel embedder: real vs real, and an untrained generator vs real.

use restyle::data::{read_shards, synth_toy_dataset, ToyDatasetSpec};
use restyle::metrics::{fid, fit_gaussian, frechet_distance, GeneratorSource, PixelEmbedder, ShardSource};
use restyle::model::{Generator, ModelConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    synth_toy_dataset(&ToyDatasetSpec { count: 1000, ..Default::default() })?.write(dir.path(), &dir.path().join("l.csv"), 1000)?;
    let set = read_shards(dir.path())?;
    let real = ShardSource { shards: &set };

    println!("real vs itself: {:.3e}", fid(&real, &real, &PixelEmbedder, 500, 3)?.value);
    let g = Generator::<f32>::new(&ModelConfig { resolution: 16, z_dim: 16, base_channels: 16, min_channels: 8, ..Default::default() }, 0)?;
    let r = fid(&GeneratorSource { generator: &g }, &real, &PixelEmbedder, 500, 3)?;
    println!("untrained generator vs real: {:.3} ({} samples, {})", r.value, r.n, r.embedder);

    let a = nalgebra::DMatrix::from_fn(200, 3, |i, j| ((i * 31 + j * 7) % 17) as f64);
    let b = a.map(|v| 2.0 * v + 1.0);
    let d = frechet_distance(&fit_gaussian(&a)?, &fit_gaussian(&b)?)?;
    println!("scaled-and-shifted Gaussian distance: {d:.6}");
    Ok(())
}
