use serde::{Deserialize, Serialize};

use super::TrainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointScore {
    /// Index into the snapshot list.
    pub snapshot_id: usize,
    pub step: u64,
    pub fid: f64,
    /// Samples per side used for the FID.
    pub n: usize,
}

/// Snapshot id with the lowest FID; equal FIDs go to the later step.
pub fn select_best_checkpoint(scores: &[CheckpointScore]) -> Result<usize, TrainError> {
    let mut best: Option<&CheckpointScore> = None;
    for s in scores {
        if s.fid.is_nan() {
            return Err(TrainError::Config(format!("snapshot {} has a NaN FID", s.snapshot_id)));
        }
        best = match best {
            Some(b) if (b.fid, std::cmp::Reverse(b.step)) <= (s.fid, std::cmp::Reverse(s.step)) => Some(b),
            _ => Some(s),
        };
    }
    best.map(|b| b.snapshot_id)
        .ok_or_else(|| TrainError::Config("no checkpoint scores to select from".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(fids: &[f64]) -> Vec<CheckpointScore> {
        fids.iter()
            .enumerate()
            .map(|(i, &fid)| CheckpointScore { snapshot_id: i, step: (i as u64 + 1) * 500, fid, n: 10 })
            .collect()
    }

    #[test]
    fn picks_the_minimum() {
        assert_eq!(select_best_checkpoint(&scores(&[12.3, 8.1, 9.0])).unwrap(), 1);
        assert_eq!(select_best_checkpoint(&scores(&[4.0])).unwrap(), 0);
    }

    #[test]
    fn ties_prefer_the_later_step() {
        assert_eq!(select_best_checkpoint(&scores(&[5.0, 5.0])).unwrap(), 1);
    }

    #[test]
    fn empty_list_is_an_error() {
        assert!(select_best_checkpoint(&[]).is_err());
    }
}
