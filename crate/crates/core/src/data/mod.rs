//! Dataset preparation: detections, margin crops, corpus filtering,
//! binary shards, a procedural toy-face corpus and a reference detector.

mod convert;
mod crop;
mod detections;
mod detector;
mod filter;
mod shard;
mod toy;

pub use convert::{images_to_tensor, shard_tensor, tensor_to_images};
pub use crop::{crop_region, crop_with_margin, resize_bilinear, CropRegion, DEFAULT_MARGIN, DEFAULT_OUT_SIZE};
pub use detections::{load_detections, parse_detections, DetectionRecord};
pub use detector::{heuristic_detector, DetectorConfig};
pub use filter::{filter_corpus, CorpusImage, CorpusItem, FilterPolicy, FilterReport, KeptCrop, RejectReason};
pub use shard::{read_shards, write_shards, ShardCursor, ShardFile, ShardHeader, ShardSet, SHARD_HEADER_LEN, SHARD_MAGIC};
pub use toy::{
    read_labels, synth_toy_dataset, toy_corpus, write_labels, ToyAttributes, ToyDataset, ToyDatasetSpec,
    ATTRIBUTE_NAMES,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: parse error: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: invalid `{field}`: {msg}")]
    Validation {
        line: usize,
        field: &'static str,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("corrupt data: {0}")]
    Corruption(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("crop error: {0}")]
    Crop(String),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}
