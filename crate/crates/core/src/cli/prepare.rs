use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{CliError, RunConfig};
use crate::data::{
    filter_corpus, heuristic_detector, load_detections, synth_toy_dataset, write_shards, CorpusImage, CorpusItem,
    DataError, DetectionRecord, FilterReport,
};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

pub enum DetectionSource {
    File(PathBuf),
    Heuristic,
}

/// Image files of `dir` in name order; the file name is the image id.
pub fn collect_input_dir(dir: &Path) -> Result<Vec<CorpusImage>, DataError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| DataError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|p| CorpusImage {
            id: p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            item: CorpusItem::Path(p),
        })
        .collect())
}

/// Decodes every image once and runs the heuristic detector on it. Undecodable
/// images keep their bytes so the filter reports them as decode errors.
fn detect_all(images: Vec<CorpusImage>, cfg: &RunConfig) -> Result<(Vec<CorpusImage>, Vec<DetectionRecord>), CliError> {
    let results: Vec<Result<(CorpusImage, Vec<DetectionRecord>), CliError>> = images
        .into_par_iter()
        .map(|img| {
            let CorpusItem::Path(p) = &img.item else {
                return Ok((img, vec![]));
            };
            let bytes = std::fs::read(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Ok(match image::load_from_memory(&bytes) {
                Ok(decoded) => {
                    let rgb = decoded.to_rgb8();
                    let dets = heuristic_detector(&img.id, &rgb, &cfg.detector);
                    (CorpusImage::decoded(img.id, rgb), dets)
                }
                Err(_) => (CorpusImage { id: img.id, item: CorpusItem::Encoded(bytes) }, vec![]),
            })
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    let mut dets = Vec::new();
    for r in results {
        let (img, d) = r?;
        out.push(img);
        dets.extend(d);
    }
    Ok((out, dets))
}

/// Filters and crops the images of `input`, writes the kept crops as shards to
/// `out_dir` together with `filter_report.json`, and prints the report summary.
pub fn cmd_prepare(
    cfg: &RunConfig,
    input: &Path,
    detections: &DetectionSource,
    out_dir: &Path,
    out: &mut dyn Write,
) -> Result<FilterReport, CliError> {
    let images = collect_input_dir(input)?;
    let (images, dets) = match detections {
        DetectionSource::File(p) => (images, load_detections(p)?),
        DetectionSource::Heuristic => detect_all(images, cfg)?,
    };
    let (kept, report) = filter_corpus(&images, &dets, &cfg.prepare);
    let size = u16::try_from(cfg.prepare.out_size)
        .map_err(|_| CliError::Usage(format!("prepare.out_size {} too large", cfg.prepare.out_size)))?;
    write_shards(out_dir, size, size, 3, kept.iter().map(|k| k.image.as_raw().as_slice()), cfg.data.shard_capacity)?;
    let path = out_dir.join("filter_report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let _ = writeln!(out, "{}", report.summary());
    Ok(report)
}

/// Synthesizes the toy dataset into `out_dir` (shards plus `labels.csv`).
pub fn cmd_prepare_toy(cfg: &RunConfig, out_dir: &Path, out: &mut dyn Write) -> Result<usize, CliError> {
    let ds = synth_toy_dataset(&cfg.toy)?;
    let paths = ds.write(out_dir, &out_dir.join("labels.csv"), cfg.data.shard_capacity)?;
    let _ = writeln!(
        out,
        "toy dataset: {} images at {}x{} in {} shard(s), labels in {}",
        ds.images.len(),
        cfg.toy.resolution,
        cfg.toy.resolution,
        paths.len(),
        out_dir.join("labels.csv").display()
    );
    Ok(ds.images.len())
}
