use std::collections::HashMap;
use std::path::PathBuf;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crop::{crop_region, crop_with_margin, DEFAULT_MARGIN, DEFAULT_OUT_SIZE};
use super::DetectionRecord;

#[derive(Debug, Clone)]
pub enum CorpusItem {
    Decoded(RgbImage),
    Encoded(Vec<u8>),
    Path(PathBuf),
}

#[derive(Debug, Clone)]
pub struct CorpusImage {
    pub id: String,
    pub item: CorpusItem,
}

impl CorpusImage {
    pub fn decoded(id: impl Into<String>, image: RgbImage) -> Self {
        CorpusImage {
            id: id.into(),
            item: CorpusItem::Decoded(image),
        }
    }

    fn decode(&self) -> Option<RgbImage> {
        match &self.item {
            CorpusItem::Decoded(img) => Some(img.clone()),
            CorpusItem::Encoded(bytes) => image::load_from_memory(bytes).ok().map(|i| i.to_rgb8()),
            CorpusItem::Path(p) => image::open(p).ok().map(|i| i.to_rgb8()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterPolicy {
    /// Detections below this confidence are ignored.
    pub min_conf: f64,
    pub margin: f64,
    pub out_size: u32,
    /// Boxes narrower or shorter than this many pixels are rejected as undersized.
    pub min_box_size: f64,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            min_conf: 0.0,
            margin: DEFAULT_MARGIN,
            out_size: DEFAULT_OUT_SIZE,
            min_box_size: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NoDetection,
    DecodeError,
    Undersized,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub total: usize,
    pub kept: usize,
    pub rejected: usize,
    pub no_detection: usize,
    pub decode_error: usize,
    pub undersized: usize,
    /// Rejected image ids with their reasons, in input order.
    pub rejections: Vec<(String, RejectReason)>,
}

impl FilterReport {
    pub fn summary(&self) -> String {
        format!(
            "total={} kept={} rejected={} no_detection={} decode_error={} undersized={}",
            self.total, self.kept, self.rejected, self.no_detection, self.decode_error, self.undersized
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeptCrop {
    pub id: String,
    pub image: RgbImage,
    pub detection: DetectionRecord,
}

/// Crops every image that has a qualifying detection (the most confident one,
/// earliest on ties) and accounts for the rest. Output order follows input order.
pub fn filter_corpus(
    images: &[CorpusImage],
    detections: &[DetectionRecord],
    policy: &FilterPolicy,
) -> (Vec<KeptCrop>, FilterReport) {
    let mut best: HashMap<&str, &DetectionRecord> = HashMap::new();
    for d in detections.iter().filter(|d| d.conf >= policy.min_conf) {
        match best.get(d.id.as_str()) {
            Some(b) if b.conf >= d.conf => {}
            _ => {
                best.insert(&d.id, d);
            }
        }
    }

    let outcomes: Vec<Result<KeptCrop, RejectReason>> = images
        .par_iter()
        .map(|img| {
            let decoded = img.decode().ok_or(RejectReason::DecodeError)?;
            let det = *best.get(img.id.as_str()).ok_or(RejectReason::NoDetection)?;
            let [_, _, w, h] = det.bbox;
            if w < policy.min_box_size || h < policy.min_box_size {
                return Err(RejectReason::Undersized);
            }
            crop_region(decoded.width(), decoded.height(), det.bbox, policy.margin)
                .map_err(|_| RejectReason::Undersized)?;
            let crop = crop_with_margin(&decoded, det.bbox, policy.margin, policy.out_size)
                .map_err(|_| RejectReason::Undersized)?;
            Ok(KeptCrop {
                id: img.id.clone(),
                image: crop,
                detection: det.clone(),
            })
        })
        .collect();

    let mut report = FilterReport {
        total: images.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for (img, outcome) in images.iter().zip(outcomes) {
        match outcome {
            Ok(k) => kept.push(k),
            Err(reason) => {
                match reason {
                    RejectReason::NoDetection => report.no_detection += 1,
                    RejectReason::DecodeError => report.decode_error += 1,
                    RejectReason::Undersized => report.undersized += 1,
                }
                report.rejections.push((img.id.clone(), reason));
            }
        }
    }
    report.kept = kept.len();
    report.rejected = report.rejections.len();
    (kept, report)
}
