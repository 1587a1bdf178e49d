use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::shard::write_shards;
use super::DataError;

pub const ATTRIBUTE_NAMES: [&str; 2] = ["face_large", "eyes_wide"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyDatasetSpec {
    pub resolution: u32,
    pub count: usize,
    pub seed: u64,
    pub p_face_large: f64,
    pub p_eyes_wide: f64,
    /// Horizontal head radius as a fraction of the resolution.
    pub large_radius: f64,
    pub small_radius: f64,
    /// Eye offset from the vertical centre line, as a fraction of the resolution.
    pub wide_eye_offset: f64,
    pub narrow_eye_offset: f64,
    /// Background pixels are uniform in `[0, background_noise]` per channel.
    pub background_noise: u8,
}

impl Default for ToyDatasetSpec {
    fn default() -> Self {
        ToyDatasetSpec {
            resolution: 16,
            count: 2000,
            seed: 0,
            p_face_large: 0.5,
            p_eyes_wide: 0.5,
            large_radius: 0.38,
            small_radius: 0.24,
            wide_eye_offset: 0.18,
            narrow_eye_offset: 0.07,
            background_noise: 48,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyAttributes {
    pub face_large: bool,
    pub eyes_wide: bool,
}

impl ToyAttributes {
    pub fn values(&self) -> [bool; 2] {
        [self.face_large, self.eyes_wide]
    }
}

/// Geometry of one drawn face, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGeometry {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub eye_dx: f64,
    pub tone: [u8; 3],
}

impl FaceGeometry {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        let dx = (x as f64 + 0.5 - self.cx) / self.rx;
        let dy = (y as f64 + 0.5 - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }

    /// Tight pixel bounding box `[x, y, w, h]` of the head ellipse.
    pub fn pixel_bbox(&self, width: u32, height: u32) -> Option<[u32; 4]> {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for y in 0..height {
            for x in 0..width {
                if self.contains(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != u32::MAX).then(|| [x0, y0, x1 - x0 + 1, y1 - y0 + 1])
    }

    fn eye_row(&self) -> f64 {
        self.cy - 0.35 * self.ry
    }

    fn mouth_row(&self) -> f64 {
        self.cy + 0.5 * self.ry
    }
}

/// Draws a face onto `img`: noisy background, head ellipse, mouth bar, two eye dots.
pub fn draw_face(img: &mut RgbImage, g: &FaceGeometry, noise: u8, rng: &mut ChaCha8Rng) {
    let (w, h) = img.dimensions();
    let scale = (w.min(h) as f64 / 32.0).max(1.0);
    let dot = scale.round() as i64;
    for y in 0..h {
        for x in 0..w {
            let px = if g.contains(x, y) {
                Rgb(g.tone)
            } else {
                let n = noise as u32 + 1;
                Rgb([rng.random_range(0..n) as u8, rng.random_range(0..n) as u8, rng.random_range(0..n) as u8])
            };
            img.put_pixel(x, y, px);
        }
    }
    let mut fill = |fx: f64, fy: f64, half_w: i64, rows: i64, color: Rgb<u8>| {
        let (x0, y0) = (fx.floor() as i64, fy.floor() as i64);
        for y in y0..y0 + rows {
            for x in x0 - half_w..=x0 + half_w {
                if x >= 0 && y >= 0 && (x as u32) < w && (y as u32) < h && g.contains(x as u32, y as u32) {
                    img.put_pixel(x as u32, y as u32, color);
                }
            }
        }
    };
    let mouth_half = (0.4 * g.rx).round() as i64;
    fill(g.cx, g.mouth_row(), mouth_half, dot, Rgb([150, 30, 40]));
    for side in [-1.0, 1.0] {
        fill(g.cx + side * g.eye_dx, g.eye_row(), dot - 1, dot, Rgb([20, 20, 40]));
    }
}

fn face_geometry(spec: &ToyDatasetSpec, attrs: ToyAttributes, rng: &mut ChaCha8Rng) -> FaceGeometry {
    let r = spec.resolution as f64;
    let rx = r * if attrs.face_large { spec.large_radius } else { spec.small_radius };
    let eye = r * if attrs.eyes_wide { spec.wide_eye_offset } else { spec.narrow_eye_offset };
    let jitter = |rng: &mut ChaCha8Rng, base: i32| (base + rng.random_range(-20..=20)) as u8;
    let tone = [jitter(rng, 210), jitter(rng, 170), jitter(rng, 135)];
    FaceGeometry {
        cx: r / 2.0,
        cy: r / 2.0,
        rx,
        ry: (1.2 * rx).min(0.48 * r),
        eye_dx: eye,
        tone,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub spec: ToyDatasetSpec,
    pub images: Vec<RgbImage>,
    pub attributes: Vec<ToyAttributes>,
    pub geometry: Vec<FaceGeometry>,
}

/// Deterministic procedural faces; sample `i` depends only on `(seed, i)`.
pub fn synth_toy_dataset(spec: &ToyDatasetSpec) -> Result<ToyDataset, DataError> {
    let r = spec.resolution;
    if r < 8 || !r.is_power_of_two() || r > u16::MAX as u32 {
        return Err(DataError::Shape(format!("toy resolution {r} must be a power of two ≥ 8")));
    }
    for (name, p) in [("p_face_large", spec.p_face_large), ("p_eyes_wide", spec.p_eyes_wide)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(DataError::Shape(format!("{name} must lie in [0,1]")));
        }
    }
    let mut out = ToyDataset {
        spec: spec.clone(),
        images: Vec::with_capacity(spec.count),
        attributes: Vec::with_capacity(spec.count),
        geometry: Vec::with_capacity(spec.count),
    };
    for i in 0..spec.count {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let attrs = ToyAttributes {
            face_large: rng.random::<f64>() < spec.p_face_large,
            eyes_wide: rng.random::<f64>() < spec.p_eyes_wide,
        };
        let g = face_geometry(spec, attrs, &mut rng);
        let mut img = RgbImage::new(r, r);
        draw_face(&mut img, &g, spec.background_noise, &mut rng);
        out.images.push(img);
        out.attributes.push(attrs);
        out.geometry.push(g);
    }
    Ok(out)
}

impl ToyDataset {
    /// Writes shards into `shard_dir` and the label CSV to `labels_path`.
    pub fn write(&self, shard_dir: &Path, labels_path: &Path, capacity: usize) -> Result<Vec<PathBuf>, DataError> {
        let r = self.spec.resolution as u16;
        let paths = write_shards(shard_dir, r, r, 3, self.images.iter().map(|i| i.as_raw().as_slice()), capacity)?;
        write_labels(labels_path, &self.attributes)?;
        Ok(paths)
    }
}

/// `sample_index,attr_name,value` rows, one per sample and attribute.
pub fn write_labels(path: &Path, attrs: &[ToyAttributes]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["sample_index", "attr_name", "value"]).map_err(|e| csv_err(path, e))?;
    for (i, a) in attrs.iter().enumerate() {
        for (name, v) in ATTRIBUTE_NAMES.iter().zip(a.values()) {
            w.write_record([i.to_string(), name.to_string(), (v as u8).to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<Vec<ToyAttributes>, DataError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out: Vec<ToyAttributes> = Vec::new();
    for (row, rec) in r.deserialize::<(usize, String, u8)>().enumerate() {
        let line = row + 2;
        let (i, name, v) = rec.map_err(|e| DataError::Parse { line, msg: e.to_string() })?;
        if v > 1 {
            return Err(DataError::Validation { line, field: "value", msg: format!("{v} is not 0/1") });
        }
        if i >= out.len() {
            out.resize(i + 1, ToyAttributes { face_large: false, eyes_wide: false });
        }
        match name.as_str() {
            "face_large" => out[i].face_large = v == 1,
            "eyes_wide" => out[i].eyes_wide = v == 1,
            _ => {
                return Err(DataError::Validation { line, field: "attr_name", msg: format!("unknown attribute `{name}`") })
            }
        }
    }
    Ok(out)
}

fn csv_err(path: &Path, e: csv::Error) -> DataError {
    DataError::io(path, std::io::Error::other(e))
}

/// A detection-test corpus: `faces` images containing one toy face at a random
/// position and size, followed by `blanks` images without any face (alternating
/// all-black and low-contrast noise). Returns `(id, image, head bbox)` triples.
pub fn toy_corpus(
    faces: usize,
    blanks: usize,
    canvas: u32,
    seed: u64,
) -> Vec<(String, RgbImage, Option<[u32; 4]>)> {
    let mut out = Vec::with_capacity(faces + blanks);
    let c = canvas as f64;
    for i in 0..faces + blanks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let id = format!("img_{i:04}.png");
        let mut img = RgbImage::new(canvas, canvas);
        if i < faces {
            let rx = c * rng.random_range(0.12..0.22);
            let ry = 1.2 * rx;
            let g = FaceGeometry {
                cx: rng.random_range(rx + 1.0..c - rx - 1.0),
                cy: rng.random_range(ry + 1.0..c - ry - 1.0),
                rx,
                ry,
                eye_dx: 0.4 * rx,
                tone: [210, 170, 135],
            };
            draw_face(&mut img, &g, 40, &mut rng);
            out.push((id, img, g.pixel_bbox(canvas, canvas)));
        } else {
            if (i - faces) % 2 == 1 {
                for p in img.pixels_mut() {
                    let v = rng.random_range(100..=140u8);
                    *p = Rgb([v, v, v]);
                }
            }
            out.push((id, img, None));
        }
    }
    out
}
