//! Trains a small generator on the procedural toy faces and reports FID per snapshot.
//!
//! `cargo run --release --example train_toy -- [steps]`

use restyle::data::{read_shards, synth_toy_dataset, ToyDatasetSpec};
use restyle::metrics::{fid, GeneratorSource, PixelEmbedder, ShardSource};
use restyle::model::ModelConfig;
use restyle::train::{initial_generator, select_best_checkpoint, train_loop, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let dir = tempfile::tempdir()?;
    let spec = ToyDatasetSpec { resolution: 16, count: 2000, seed: 7, ..Default::default() };
    synth_toy_dataset(&spec)?.write(&dir.path().join("shards"), &dir.path().join("labels.csv"), 1000)?;
    let shards = read_shards(&dir.path().join("shards"))?;

    let model = ModelConfig { resolution: 16, z_dim: 32, base_channels: 32, min_channels: 16, ..Default::default() };
    let cfg = TrainConfig { steps, seed: 7, fid_n: 1000, snapshot_every: (steps / 4).max(1), ..Default::default() };

    let g0 = initial_generator(&model, &cfg)?;
    let src = ShardSource { shards: &shards };
    let before = fid(&GeneratorSource { generator: &g0 }, &src, &PixelEmbedder, cfg.fid_n, 1)?;
    println!("untrained FID {:.4}", before.value);

    let t = std::time::Instant::now();
    let out = train_loop(&shards, &model, &cfg, &PixelEmbedder)?;
    for s in &out.scores {
        println!("step {:>5}  FID {:.4}", s.step, s.fid);
    }
    if let Some(last) = out.log.last() {
        println!("final losses d={:.4} g={:.4} r1={:.4}", last.loss_d, last.loss_g, last.r1);
    }
    if !out.scores.is_empty() {
        println!("best snapshot {}", select_best_checkpoint(&out.scores)?);
    }
    println!("{} steps in {:.1}s", steps, t.elapsed().as_secs_f64());
    Ok(())
}
