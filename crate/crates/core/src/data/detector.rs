use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::DetectionRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    /// Minimum luminance difference from the background level.
    pub contrast: f64,
    /// Minimum blob area as a fraction of the image.
    pub min_area_fraction: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            contrast: 60.0,
            min_area_fraction: 0.005,
        }
    }
}

fn luma(p: &image::Rgb<u8>) -> f64 {
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

/// Largest 4-connected blob whose luminance differs from the border median by
/// more than `cfg.contrast`. Confidence is the blob's fill ratio of its box.
pub fn heuristic_detector(id: &str, image: &RgbImage, cfg: &DetectorConfig) -> Vec<DetectionRecord> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w == 0 || h == 0 {
        return vec![];
    }
    let lum: Vec<f64> = image.pixels().map(luma).collect();
    let mut border: Vec<f64> = (0..w)
        .flat_map(|x| [lum[x], lum[(h - 1) * w + x]])
        .chain((0..h).flat_map(|y| [lum[y * w], lum[y * w + w - 1]]))
        .collect();
    border.sort_by(f64::total_cmp);
    let bg = border[border.len() / 2];
    let fg: Vec<bool> = lum.iter().map(|&l| (l - bg).abs() > cfg.contrast).collect();

    let mut label = vec![false; w * h];
    let mut best: Option<(usize, [usize; 4])> = None;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !fg[start] || label[start] {
            continue;
        }
        label[start] = true;
        stack.push(start);
        let (mut area, mut x0, mut y0, mut x1, mut y1) = (0, usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            let mut visit = |j: usize| {
                if fg[j] && !label[j] {
                    label[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if best.is_none_or(|(a, _)| area > a) {
            best = Some((area, [x0, y0, x1, y1]));
        }
    }
    let min_area = (cfg.min_area_fraction * (w * h) as f64).max(4.0);
    match best {
        Some((area, [x0, y0, x1, y1])) if area as f64 >= min_area => {
            let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
            vec![DetectionRecord::new(
                id,
                [x0 as f64, y0 as f64, bw as f64, bh as f64],
                area as f64 / (bw * bh) as f64,
            )]
        }
        _ => vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::toy_corpus;
    use rand::{Rng, SeedableRng};

    #[test]
    fn black_image_has_no_detection() {
        let img = RgbImage::new(32, 32);
        assert!(heuristic_detector("a", &img, &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn low_contrast_noise_has_no_detection() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let img = RgbImage::from_fn(32, 32, |_, _| {
            let v = rng.random_range(90..=130u8);
            image::Rgb([v, v, v])
        });
        assert!(heuristic_detector("a", &img, &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn toy_face_box_matches_ellipse() {
        for (id, img, truth) in toy_corpus(10, 0, 64, 5) {
            let d = heuristic_detector(&id, &img, &DetectorConfig::default());
            assert_eq!(d.len(), 1);
            let [tx, ty, tw, th] = truth.unwrap().map(|v| v as f64);
            let [x, y, w, h] = d[0].bbox;
            assert!((x - tx).abs() <= 2.0 && (y - ty).abs() <= 2.0);
            assert!((x + w - tx - tw).abs() <= 2.0 && (y + h - ty - th).abs() <= 2.0);
            assert!(d[0].conf > 0.5 && d[0].conf <= 1.0);
        }
    }
}
