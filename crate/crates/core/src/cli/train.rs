use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use super::generate::render_cells;
use super::render::{render_grid, save_png};
use super::{CliError, GenerateMode, ManifestSnapshot, RunConfig, RunManifest};
use crate::data::read_shards;
use crate::metrics::PixelEmbedder;
use crate::train::{
    generator_from_snapshot, select_best_checkpoint, train_loop_with, CheckpointScore, LogRow, Snapshot,
    TrainError, TrainLogWriter, TrainObserver,
};

struct RunObserver<'a> {
    run_dir: &'a Path,
    log: TrainLogWriter,
    out: &'a mut dyn Write,
    saved: Vec<ManifestSnapshot>,
}

impl TrainObserver for RunObserver<'_> {
    fn on_log(&mut self, row: &LogRow) -> Result<(), TrainError> {
        Ok(self.log.append(row)?)
    }

    fn on_snapshot(&mut self, snapshot: &Snapshot, score: &CheckpointScore) -> Result<(), TrainError> {
        let rel = format!("snapshots/step-{:06}.sgfw", snapshot.step);
        snapshot.file.save(&self.run_dir.join(&rel))?;
        let _ = writeln!(self.out, "step {:>6}  fid {:.4}  -> {rel}", snapshot.step, score.fid);
        self.saved.push(ManifestSnapshot { path: rel, step: snapshot.step, fid: score.fid });
        Ok(())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn mkdir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

/// Removes artifacts of an earlier run in the same directory so reruns start clean.
fn clear_previous(run_dir: &Path) -> Result<(), CliError> {
    for sub in ["snapshots", "logs", "reports", "images"] {
        let p = run_dir.join(sub);
        if p.exists() {
            std::fs::remove_dir_all(&p).map_err(|e| io_err(&p, e))?;
        }
        mkdir(&p)?;
    }
    Ok(())
}

/// Trains on `shards`, filling `run_dir` with the resolved config, snapshots,
/// the training log, a checkpoint report, a sample grid of the best checkpoint
/// and `manifest.json`.
pub fn cmd_train(cfg: &RunConfig, shards: &Path, run_dir: &Path, out: &mut dyn Write) -> Result<RunManifest, CliError> {
    let set = read_shards(shards)?;
    let r = cfg.model.resolution;
    let (w, h, c) = set.record_shape();
    if (w, h, c) != (r, r, 3) {
        return Err(CliError::Data(format!(
            "resolution mismatch: shards hold {w}x{h}x{c} records but model.resolution is {r}"
        )));
    }
    mkdir(run_dir)?;
    clear_previous(run_dir)?;
    let config_path = run_dir.join("config.toml");
    std::fs::write(&config_path, cfg.to_toml()).map_err(|e| io_err(&config_path, e))?;
    let log_path = run_dir.join("logs/train.csv");
    let log = TrainLogWriter::create(&log_path).map_err(|e| io_err(&log_path, e))?;

    let hash = cfg.hash();
    let _ = writeln!(out, "training {} steps on {} images (config {})", cfg.train.steps, set.len(), &hash[..12]);
    let mut obs = RunObserver { run_dir, log, out, saved: Vec::new() };
    let outcome = train_loop_with(&set, &cfg.model, &cfg.train, &PixelEmbedder, &mut obs)?;
    let RunObserver { out, saved, .. } = obs;

    let report = "reports/checkpoints.csv";
    let report_path = run_dir.join(report);
    let mut wr = csv::Writer::from_path(&report_path).map_err(|e| io_err(&report_path, e))?;
    wr.write_record(["snapshot", "step", "fid", "n"]).map_err(|e| io_err(&report_path, e))?;
    for (s, score) in saved.iter().zip(&outcome.scores) {
        wr.write_record([s.path.clone(), s.step.to_string(), score.fid.to_string(), score.n.to_string()])
            .map_err(|e| io_err(&report_path, e))?;
    }
    wr.flush().map_err(|e| io_err(&report_path, e))?;

    let mut best = None;
    let mut images = Vec::new();
    if !outcome.scores.is_empty() {
        let id = select_best_checkpoint(&outcome.scores)?;
        let g = generator_from_snapshot(&outcome.snapshots[id].file, "g_ema.")?;
        let mut grid_cfg = cfg.clone();
        grid_cfg.generate.mode = GenerateMode::Grid;
        let (rows, cols, cells) = render_cells(&g, &grid_cfg, &mut std::io::sink())?;
        let rel = "images/best_grid.png".to_string();
        save_png(&render_grid(&cells, rows, cols)?, &run_dir.join(&rel))?;
        images.push(rel);
        let b = &saved[id];
        let _ = writeln!(out, "best checkpoint: {} (step {}, fid {:.4})", b.path, b.step, b.fid);
        best = Some(b.path.clone());
    } else {
        let _ = writeln!(out, "no snapshots taken");
    }
    if let Some(msg) = &outcome.aborted {
        let _ = writeln!(out, "training aborted: {msg}");
    }

    let manifest = RunManifest {
        run_id: format!("run-{}-seed{}", &hash[..12], cfg.train.seed),
        config_hash: hash,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        created: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        config: "config.toml".into(),
        train_log: "logs/train.csv".into(),
        snapshots: saved,
        best,
        reports: vec![report.into()],
        images,
        aborted: outcome.aborted,
    };
    manifest.write(run_dir)?;
    Ok(manifest)
}
