use std::io::Write;
use std::path::{Path, PathBuf};

use image::RgbImage;

use super::render::{render_grid, save_png};
use super::{CliError, GenerateMode, RunConfig};
use crate::data::tensor_to_images;
use crate::metrics::derive_seed;
use crate::model::{sample_latents, Generator, NoiseConfig, NoiseMode, SnapshotFile, TruncationConfig};
use crate::train::{generator_from_snapshot, SNAPSHOT_KIND};

const CHUNK: usize = 64;
const ABLATION_COLUMNS: [(&str, NoiseMode); 4] = [
    ("all", NoiseMode::All),
    ("none", NoiseMode::None),
    ("fine", NoiseMode::FineOnly),
    ("coarse", NoiseMode::CoarseOnly),
];

#[derive(Debug, Clone)]
pub struct GeneratedImages {
    pub mode: GenerateMode,
    pub rows: usize,
    pub cols: usize,
    /// Row-major cells.
    pub cells: Vec<RgbImage>,
    pub composite: RgbImage,
    /// Composite first, then one file per cell.
    pub files: Vec<PathBuf>,
}

/// Loads the generator of a training snapshot (`g_ema.` or `g.` parameters).
pub fn load_generator(path: &Path, use_ema: bool) -> Result<Generator<f32>, CliError> {
    let file = SnapshotFile::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if file.header.kind != SNAPSHOT_KIND {
        return Err(CliError::Data(format!(
            "{}: snapshot kind `{}` is not a GAN snapshot",
            path.display(),
            file.header.kind
        )));
    }
    Ok(generator_from_snapshot(&file, if use_ema { "g_ema." } else { "g." })?)
}

fn warn_psi(psi: f64, err: &mut dyn Write) {
    if !(-2.0..=2.0).contains(&psi) {
        let _ = writeln!(err, "warning: psi {psi} lies outside [-2, 2]");
    }
}

fn to_image(t: &crate::Tensor<f32>) -> Result<RgbImage, CliError> {
    Ok(tensor_to_images(t)?.remove(0))
}

/// Renders the cells of the configured mode: `(rows, cols, row-major cells)`.
pub(crate) fn render_cells(
    g: &Generator<f32>,
    cfg: &RunConfig,
    err: &mut dyn Write,
) -> Result<(usize, usize, Vec<RgbImage>), CliError> {
    let gen = &cfg.generate;
    let tr = &cfg.truncation;
    let mean_w = g.mean_w(tr.mean_w_samples, tr.mean_w_seed)?;
    let trunc = |psi: f64| TruncationConfig::new(psi, tr.cutoff_resolution, mean_w.clone());
    let layer_seeds: Vec<u64> = (0..g.num_layers() as u64).map(|l| derive_seed(gen.noise_seed, l)).collect();
    match gen.mode {
        GenerateMode::Grid => {
            warn_psi(tr.psi, err);
            let n = gen.rows * gen.cols;
            let z = sample_latents::<f32>(n, g.z_dim(), gen.seed);
            let t = trunc(tr.psi);
            let mut cells = Vec::with_capacity(n);
            let mut start = 0;
            while start < n {
                let count = CHUNK.min(n - start);
                let seeds = (start..start + count).map(|i| derive_seed(gen.noise_seed, i as u64)).collect();
                let imgs = g.generate(&z.slice_outer(start, count)?, Some(&t), &NoiseConfig::all_from_sample_seeds(seeds))?;
                cells.extend(tensor_to_images(&imgs)?);
                start += count;
            }
            Ok((gen.rows, gen.cols, cells))
        }
        GenerateMode::TruncSweep => {
            if gen.psi_values.is_empty() {
                return Err(CliError::Usage("trunc_sweep needs at least one psi value".into()));
            }
            gen.psi_values.iter().for_each(|&p| warn_psi(p, err));
            let z = sample_latents::<f32>(gen.latents, g.z_dim(), gen.seed);
            let noise = NoiseConfig::all_from_layer_seeds(layer_seeds);
            let mut cells = Vec::new();
            for r in 0..gen.latents {
                let w = g.map_latent(&z.slice_outer(r, 1)?)?;
                for &psi in &gen.psi_values {
                    let styles = g.layer_styles(&w, Some(&trunc(psi)))?;
                    cells.push(to_image(&g.synthesize(&styles, &noise)?)?);
                }
            }
            Ok((gen.latents, gen.psi_values.len(), cells))
        }
        GenerateMode::NoiseAblation => {
            warn_psi(tr.psi, err);
            let z = sample_latents::<f32>(gen.latents, g.z_dim(), gen.seed);
            let t = trunc(tr.psi);
            let mut cells = Vec::new();
            for r in 0..gen.latents {
                let styles = g.layer_styles(&g.map_latent(&z.slice_outer(r, 1)?)?, Some(&t))?;
                for (_, mode) in &ABLATION_COLUMNS {
                    let noise = NoiseConfig {
                        coarse_max_resolution: gen.coarse_max_resolution,
                        ..NoiseConfig::all_from_layer_seeds(layer_seeds.clone()).with_mode(mode.clone())
                    };
                    cells.push(to_image(&g.synthesize(&styles, &noise)?)?);
                }
            }
            Ok((gen.latents, ABLATION_COLUMNS.len(), cells))
        }
    }
}

/// Renders the configured mode from `snapshot` into `out_dir` as
/// `<mode>.png` plus `<mode>_rRR_cCC.png` per cell.
pub fn cmd_generate(
    cfg: &RunConfig,
    snapshot: &Path,
    out_dir: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<GeneratedImages, CliError> {
    let g = load_generator(snapshot, cfg.generate.use_ema)?;
    let (rows, cols, cells) = render_cells(&g, cfg, err)?;
    let composite = render_grid(&cells, rows, cols)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Data(format!("{}: {e}", out_dir.display())))?;
    let mode = cfg.generate.mode;
    let mut files = vec![out_dir.join(format!("{}.png", mode.as_str()))];
    save_png(&composite, &files[0])?;
    for (k, cell) in cells.iter().enumerate() {
        let p = out_dir.join(format!("{}_r{:02}_c{:02}.png", mode.as_str(), k / cols, k % cols));
        save_png(cell, &p)?;
        files.push(p);
    }
    let columns = match mode {
        GenerateMode::Grid => String::new(),
        GenerateMode::TruncSweep => format!(" psi={:?}", cfg.generate.psi_values),
        GenerateMode::NoiseAblation => " columns=all,none,fine,coarse".into(),
    };
    let _ = writeln!(
        out,
        "{}: {rows}x{cols} cells{columns} -> {} ({}x{})",
        mode.as_str(),
        files[0].display(),
        composite.width(),
        composite.height()
    );
    Ok(GeneratedImages { mode, rows, cols, cells, composite, files })
}
