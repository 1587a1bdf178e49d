use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSnapshot {
    /// Path relative to the run directory.
    pub path: String,
    pub step: u64,
    pub fid: f64,
}

/// Index of a training run directory. Paths are relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_hash: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch; the only field that differs between reruns.
    pub created: u64,
    pub config: String,
    pub train_log: String,
    pub snapshots: Vec<ManifestSnapshot>,
    pub best: Option<String>,
    pub reports: Vec<String>,
    pub images: Vec<String>,
    pub aborted: Option<String>,
}

impl RunManifest {
    /// Every path named by the manifest, relative to the run directory.
    pub fn referenced_files(&self) -> Vec<&str> {
        let mut v = vec![self.config.as_str(), self.train_log.as_str()];
        v.extend(self.snapshots.iter().map(|s| s.path.as_str()));
        v.extend(self.best.as_deref());
        v.extend(self.reports.iter().map(String::as_str));
        v.extend(self.images.iter().map(String::as_str));
        v
    }

    /// Writes `manifest.json` after checking that every referenced file exists.
    pub fn write(&self, run_dir: &Path) -> Result<(), CliError> {
        if let Some(missing) = self.referenced_files().into_iter().find(|p| !run_dir.join(p).is_file()) {
            return Err(CliError::Data(format!("manifest references missing file {missing}")));
        }
        let path = run_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    pub fn load(run_dir: &Path) -> Result<Self, CliError> {
        let path = run_dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}
