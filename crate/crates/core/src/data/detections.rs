use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

/// One detector output: `box` is `[x, y, width, height]` with a top-left origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub id: String,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub conf: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<Vec<[f64; 2]>>,
}

impl DetectionRecord {
    pub fn new(id: impl Into<String>, bbox: [f64; 4], conf: f64) -> Self {
        DetectionRecord {
            id: id.into(),
            bbox,
            conf,
            landmarks: None,
        }
    }

    fn validate(&self, line: usize) -> Result<(), DataError> {
        let invalid = |field, msg: String| DataError::Validation { line, field, msg };
        let [x, y, w, h] = self.bbox;
        if !(x.is_finite() && y.is_finite()) {
            return Err(invalid("box", "origin is not finite".into()));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(invalid("box.width", format!("must be positive, got {w}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid("box.height", format!("must be positive, got {h}")));
        }
        if !(0.0..=1.0).contains(&self.conf) {
            return Err(invalid("conf", format!("must lie in [0,1], got {}", self.conf)));
        }
        if let Some(lm) = &self.landmarks {
            if lm.len() != 5 {
                return Err(invalid("landmarks", format!("expected 5 points, got {}", lm.len())));
            }
        }
        Ok(())
    }
}

/// Parses JSON-lines detections. Blank lines are ignored; line numbers are 1-based.
pub fn parse_detections(text: &str) -> Result<Vec<DetectionRecord>, DataError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord = serde_json::from_str(raw).map_err(|e| DataError::Parse {
            line,
            msg: e.to_string(),
        })?;
        rec.validate(line)?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_detections(path: &Path) -> Result<Vec<DetectionRecord>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    parse_detections(&text)
}
