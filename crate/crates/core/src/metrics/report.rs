use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::data::DataError;

/// One row of `metric,space,variant,embedder,n,seed,value`. A failed metric
/// stores `error: <message>` in `value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub space: String,
    pub variant: String,
    pub embedder: String,
    pub n: usize,
    pub seed: u64,
    pub value: String,
}

impl MetricRow {
    pub fn ok(metric: &str, space: &str, variant: &str, embedder: &str, n: usize, seed: u64, value: f64) -> Self {
        MetricRow {
            metric: metric.into(),
            space: space.into(),
            variant: variant.into(),
            embedder: embedder.into(),
            n,
            seed,
            value: value.to_string(),
        }
    }

    pub fn error(metric: &str, space: &str, variant: &str, embedder: &str, n: usize, seed: u64, err: &str) -> Self {
        MetricRow {
            value: format!("error: {err}"),
            ..Self::ok(metric, space, variant, embedder, n, seed, 0.0)
        }
    }

    /// The numeric value, or `None` for an error row.
    pub fn number(&self) -> Option<f64> {
        self.value.parse().ok()
    }
}

fn io(path: &Path, e: csv::Error) -> MetricError {
    MetricError::Data(DataError::Io {
        path: path.into(),
        source: std::io::Error::other(e),
    })
}

pub fn write_metric_csv(path: &Path, rows: &[MetricRow]) -> Result<(), MetricError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    if rows.is_empty() {
        w.write_record(["metric", "space", "variant", "embedder", "n", "seed", "value"])
            .map_err(|e| io(path, e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e.into()))
}

pub fn read_metric_csv(path: &Path) -> Result<Vec<MetricRow>, MetricError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| io(path, e))).collect()
}
