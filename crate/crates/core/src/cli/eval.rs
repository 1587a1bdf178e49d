use std::io::Write;
use std::path::{Path, PathBuf};

use super::generate::load_generator;
use super::{CliError, RunConfig};
use crate::data::{read_labels, read_shards, shard_tensor, ShardSet};
use crate::metrics::{
    fid, linear_separability, ppl, write_metric_csv, AttributeClassifier, AttributeOracle, ClassifierOracle, Embedder,
    GeneratorSource, LatentCoordinateOracle, MetricRow, PixelEmbedder, PplConfig, Sampling, SeparabilityConfig,
    ShardSource, Space,
};

#[derive(Debug, Clone, Copy, PartialEq)]
enum MetricSpec {
    Fid,
    Ppl(Space, Sampling),
    Ls(Space),
}

fn parse_metric(name: &str) -> Result<MetricSpec, CliError> {
    Ok(match name {
        "fid" => MetricSpec::Fid,
        "ppl_zfull" => MetricSpec::Ppl(Space::Z, Sampling::Full),
        "ppl_wfull" => MetricSpec::Ppl(Space::W, Sampling::Full),
        "ppl_zend" => MetricSpec::Ppl(Space::Z, Sampling::End),
        "ppl_wend" => MetricSpec::Ppl(Space::W, Sampling::End),
        "ls_z" => MetricSpec::Ls(Space::Z),
        "ls_w" => MetricSpec::Ls(Space::W),
        other => {
            return Err(CliError::Usage(format!(
                "unknown metric `{other}` (expected fid, ppl_zfull, ppl_wfull, ppl_zend, ppl_wend, ls_z, ls_w)"
            )))
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<MetricRow>,
    pub csv: PathBuf,
}

fn load_real(cfg: &RunConfig) -> Result<ShardSet, String> {
    if cfg.data.shards.is_empty() {
        return Err("no real shards given (data.shards / --shards)".into());
    }
    read_shards(Path::new(&cfg.data.shards)).map_err(|e| e.to_string())
}

/// Fits the attribute classifier on every real image and its labels.
fn train_classifier(cfg: &RunConfig, real: &Result<ShardSet, String>) -> Result<AttributeClassifier, String> {
    let set = real.as_ref().map_err(|e| format!("classifier: {e}"))?;
    if cfg.data.labels.is_empty() {
        return Err("classifier: no labels given (data.labels / --labels)".into());
    }
    let labels = read_labels(Path::new(&cfg.data.labels)).map_err(|e| format!("classifier: {e}"))?;
    if labels.len() != set.len() {
        return Err(format!("classifier: {} labels for {} images", labels.len(), set.len()));
    }
    let idx: Vec<usize> = (0..set.len()).collect();
    let x = shard_tensor::<f64>(set, &idx).map_err(|e| format!("classifier: {e}"))?;
    AttributeClassifier::train(&cfg.classifier, &x, &labels).map_err(|e| format!("classifier: {e}"))
}

/// Computes the configured metrics for the generator in `snapshot`, writes the
/// metric CSV to `out_csv` and prints a summary table. A metric that cannot be
/// computed becomes an error row; the others still run.
pub fn cmd_eval(cfg: &RunConfig, snapshot: &Path, out_csv: &Path, out: &mut dyn Write) -> Result<EvalReport, CliError> {
    let m = &cfg.metrics;
    let specs = m.list.iter().map(|s| parse_metric(s)).collect::<Result<Vec<_>, _>>()?;
    if !matches!(m.embedder.as_str(), "pixel" | "classifier") {
        return Err(CliError::Usage(format!("metrics.embedder `{}` is not pixel or classifier", m.embedder)));
    }
    if !matches!(m.ls_oracle.as_str(), "classifier" | "latent_coordinate") {
        return Err(CliError::Usage(format!(
            "metrics.ls_oracle `{}` is not classifier or latent_coordinate",
            m.ls_oracle
        )));
    }
    let g = load_generator(snapshot, cfg.generate.use_ema)?;

    let needs_real = specs.contains(&MetricSpec::Fid) || m.embedder == "classifier" || m.ls_oracle == "classifier";
    let real = if needs_real { load_real(cfg) } else { Err("real shards not loaded".into()) };
    let needs_classifier = m.embedder == "classifier"
        || (m.ls_oracle == "classifier" && specs.iter().any(|s| matches!(s, MetricSpec::Ls(_))));
    let classifier = if needs_classifier { Some(train_classifier(cfg, &real)) } else { None };
    let embedder: Result<&dyn Embedder, String> = match (m.embedder.as_str(), &classifier) {
        ("classifier", Some(c)) => c.as_ref().map(|c| c as &dyn Embedder).map_err(Clone::clone),
        _ => Ok(&PixelEmbedder),
    };

    let class_oracle = classifier.as_ref().and_then(|c| c.as_ref().ok()).map(ClassifierOracle);

    let mut rows = Vec::with_capacity(specs.len());
    for (name, spec) in m.list.iter().zip(&specs) {
        let row = match *spec {
            MetricSpec::Fid => {
                let r = embedder.clone().and_then(|e| {
                    let set = real.as_ref().map_err(Clone::clone)?;
                    fid(&GeneratorSource { generator: &g }, &ShardSource { shards: set }, e, m.fid_n, m.seed)
                        .map_err(|e| e.to_string())
                });
                match r {
                    Ok(v) => MetricRow::ok(name, "", "", &v.embedder, v.n, m.seed, v.value),
                    Err(e) => MetricRow::error(name, "", "", &m.embedder, m.fid_n, m.seed, &e),
                }
            }
            MetricSpec::Ppl(space, sampling) => {
                let pc = PplConfig { epsilon: m.ppl_epsilon, ..PplConfig::new(space, sampling, m.ppl_pairs, m.seed) };
                let r = embedder.clone().and_then(|e| ppl(&g, &pc, e).map_err(|e| e.to_string()));
                let (sp, va) = (space.as_str(), sampling.as_str());
                match r {
                    Ok(v) => MetricRow::ok(name, sp, va, &v.embedder, v.n_pairs, m.seed, v.value),
                    Err(e) => MetricRow::error(name, sp, va, &m.embedder, m.ppl_pairs, m.seed, &e),
                }
            }
            MetricSpec::Ls(space) => {
                let sc = SeparabilityConfig {
                    keep_fraction: m.ls_keep_fraction,
                    classifier_steps: m.ls_steps,
                    ..SeparabilityConfig::new(space, m.ls_samples, m.seed)
                };
                let coordinate = LatentCoordinateOracle { space, coordinate: 0 };
                let oracle: Result<&dyn AttributeOracle, String> = match (m.ls_oracle.as_str(), &classifier) {
                    ("classifier", Some(Err(e))) => Err(e.clone()),
                    ("classifier", Some(Ok(_))) => Ok(class_oracle.as_ref().expect("classifier trained")),
                    _ => Ok(&coordinate),
                };
                let r = oracle.and_then(|o| linear_separability(&g, o, &sc).map_err(|e| e.to_string()));
                match r {
                    Ok(v) => MetricRow::ok(name, space.as_str(), "", &m.ls_oracle, m.ls_samples, m.seed, v.score),
                    Err(e) => MetricRow::error(name, space.as_str(), "", &m.ls_oracle, m.ls_samples, m.seed, &e),
                }
            }
        };
        rows.push(row);
    }

    if let Some(dir) = out_csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    write_metric_csv(out_csv, &rows)?;
    let _ = writeln!(out, "{:<10} {:<5} {:<7} {:<18} {:>6}  value", "metric", "space", "variant", "embedder", "n");
    for r in &rows {
        let _ = writeln!(
            out,
            "{:<10} {:<5} {:<7} {:<18} {:>6}  {}",
            r.metric, r.space, r.variant, r.embedder, r.n, r.value
        );
    }
    Ok(EvalReport { rows, csv: out_csv.to_path_buf() })
}
