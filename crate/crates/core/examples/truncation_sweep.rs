//! Renders one row per latent and one column per ψ, including the mean-face column ψ = 0.
//!
//! `cargo run --example truncation_sweep -- out.png`

use restyle::cli::render_grid;
use restyle::data::tensor_to_images;
use restyle::model::{sample_latents, Generator, ModelConfig, NoiseConfig, TruncationConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "truncation_sweep.png".into());
    let cfg = ModelConfig { resolution: 32, z_dim: 32, base_channels: 32, min_channels: 8, ..Default::default() };
    let g = Generator::<f32>::new(&cfg, 1)?;
    let mean_w = g.mean_w(2048, 0)?;
    let psis = [1.0, 0.7, 0.5, 0.0, -0.5];
    let noise = NoiseConfig::all_from_layer_seeds((0..g.num_layers() as u64).collect());
    let z = sample_latents::<f32>(3, cfg.z_dim, 9);

    let mut cells = Vec::new();
    for r in 0..3 {
        let w = g.map_latent(&z.slice_outer(r, 1)?)?;
        for &psi in &psis {
            let styles = g.layer_styles(&w, Some(&TruncationConfig::new(psi, 32, mean_w.clone())))?;
            cells.extend(tensor_to_images(&g.synthesize(&styles, &noise)?)?);
        }
    }
    let mean_face_identical = (0..3).all(|r| cells[r * psis.len() + 3] == cells[3]);
    println!("psi=0 column identical across rows: {mean_face_identical}");
    render_grid(&cells, 3, psis.len())?.save(&out)?;
    println!("wrote {out}");
    Ok(())
}
