use std::fs::{File, OpenOptions};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// One training-log row; `fid` is only present at snapshot steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub loss_d: f64,
    pub loss_g: f64,
    pub r1: f64,
    pub fid: Option<f64>,
}

/// Append-only `step,loss_d,loss_g,r1,fid` CSV.
pub struct TrainLogWriter {
    inner: csv::Writer<File>,
}

impl TrainLogWriter {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if fresh {
            inner.write_record(["step", "loss_d", "loss_g", "r1", "fid"])?;
        }
        Ok(TrainLogWriter { inner })
    }

    pub fn append(&mut self, row: &LogRow) -> std::io::Result<()> {
        self.inner.serialize(row)?;
        self.inner.flush()
    }
}

pub fn read_train_log(path: &Path) -> std::io::Result<Vec<LogRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(std::io::Error::other))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_fid_between_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.csv");
        let rows = vec![
            LogRow { step: 1, loss_d: 1.25, loss_g: 0.5, r1: 0.01, fid: None },
            LogRow { step: 2, loss_d: 1.0, loss_g: 0.75, r1: 0.02, fid: Some(12.5) },
        ];
        let mut w = TrainLogWriter::create(&p).unwrap();
        for r in &rows {
            w.append(r).unwrap();
        }
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "step,loss_d,loss_g,r1,fid\n1,1.25,0.5,0.01,\n2,1.0,0.75,0.02,12.5\n");
        assert_eq!(read_train_log(&p).unwrap(), rows);
    }
}
