//! Synthesizes the labelled toy face dataset, writes it as shards and reads it back.

use restyle::data::{read_labels, read_shards, shard_tensor, synth_toy_dataset, ToyDatasetSpec, ATTRIBUTE_NAMES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let spec = ToyDatasetSpec { count: 500, seed: 3, ..Default::default() };
    let ds = synth_toy_dataset(&spec)?;
    let paths = ds.write(&dir.path().join("shards"), &dir.path().join("labels.csv"), 128)?;
    println!("wrote {} images into {} shards", ds.images.len(), paths.len());

    let set = read_shards(&dir.path().join("shards"))?;
    let labels = read_labels(&dir.path().join("labels.csv"))?;
    assert_eq!(set.record(42), ds.images[42].as_raw().as_slice());
    for (k, name) in ATTRIBUTE_NAMES.iter().enumerate() {
        let on = labels.iter().filter(|a| a.values()[k]).count();
        println!("{name}: {on}/{}", labels.len());
    }

    let batch = shard_tensor::<f32>(&set, &[0, 1, 2, 3])?;
    println!("batch tensor {:?}, range [-1, 1]", batch.shape());
    let total: usize = set.partition(4).into_iter().map(|c| c.count()).sum();
    println!("4 cursors cover {total} records");
    Ok(())
}
