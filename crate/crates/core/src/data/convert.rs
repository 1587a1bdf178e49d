use image::RgbImage;

use super::{DataError, ShardSet};
use crate::tensor::{Element, Tensor};

fn to_unit<T: Element>(v: u8) -> T {
    T::lit(v as f64 / 127.5 - 1.0)
}

/// Interleaved RGB bytes (`h × w × 3`) appended as planar values in `[-1, 1]`.
fn push_planar<T: Element>(raw: &[u8], w: usize, h: usize, out: &mut Vec<T>) {
    for c in 0..3 {
        for i in 0..w * h {
            out.push(to_unit(raw[i * 3 + c]));
        }
    }
}

/// `[n, 3, h, w]` tensor in `[-1, 1]` from equally sized images.
pub fn images_to_tensor<T: Element>(images: &[RgbImage]) -> Result<Tensor<T>, DataError> {
    let first = images
        .first()
        .ok_or_else(|| DataError::Shape("no images to convert".into()))?;
    let (w, h) = (first.width() as usize, first.height() as usize);
    let mut data = Vec::with_capacity(images.len() * 3 * w * h);
    for img in images {
        if img.dimensions() != first.dimensions() {
            return Err(DataError::Shape("images differ in size".into()));
        }
        push_planar(img.as_raw(), w, h, &mut data);
    }
    Tensor::new(&[images.len(), 3, h, w], data).map_err(|e| DataError::Shape(e.to_string()))
}

/// `[indices.len(), 3, h, w]` tensor of shard records in `[-1, 1]`.
pub fn shard_tensor<T: Element>(set: &ShardSet, indices: &[usize]) -> Result<Tensor<T>, DataError> {
    let (w, h, c) = set.record_shape();
    if c != 3 {
        return Err(DataError::Shape(format!("{c}-channel records are not RGB")));
    }
    if indices.is_empty() {
        return Err(DataError::Shape("no records requested".into()));
    }
    let mut data = Vec::with_capacity(indices.len() * 3 * w * h);
    for &i in indices {
        if i >= set.len() {
            return Err(DataError::Shape(format!("record {i} out of range ({})", set.len())));
        }
        push_planar(set.record(i), w, h, &mut data);
    }
    Tensor::new(&[indices.len(), 3, h, w], data).map_err(|e| DataError::Shape(e.to_string()))
}

/// Quantizes a `[n, 3, h, w]` tensor in `[-1, 1]` to 8-bit images (clamped, rounded).
pub fn tensor_to_images<T: Element>(t: &Tensor<T>) -> Result<Vec<RgbImage>, DataError> {
    let s = t.shape();
    if s.len() != 4 || s[1] != 3 {
        return Err(DataError::Shape(format!("expected [n,3,h,w], got {s:?}")));
    }
    let (h, w) = (s[2], s[3]);
    let plane = h * w;
    Ok(t.data()
        .chunks(3 * plane)
        .map(|img| {
            let mut raw = Vec::with_capacity(3 * plane);
            for i in 0..plane {
                for c in 0..3 {
                    let v = (img[c * plane + i].as_f64() + 1.0) * 127.5;
                    raw.push(if v.is_nan() { 0 } else { v.round().clamp(0.0, 255.0) as u8 });
                }
            }
            RgbImage::from_raw(w as u32, h as u32, raw).expect("buffer length")
        })
        .collect())
}
