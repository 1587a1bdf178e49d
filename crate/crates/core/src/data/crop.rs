use image::RgbImage;

use super::DataError;

pub const DEFAULT_MARGIN: f64 = 50.0;
pub const DEFAULT_OUT_SIZE: u32 = 256;

/// Integer pixel rectangle `[x, x+width) × [y, y+height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRegion {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

/// Expands `bbox` by `margin/2` on every side and clamps to the image.
/// Fractional edges are widened outward to whole pixels.
pub fn crop_region(
    image_width: u32,
    image_height: u32,
    bbox: [f64; 4],
    margin: f64,
) -> Result<CropRegion, DataError> {
    let [x, y, w, h] = bbox;
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(DataError::Crop(format!("margin must be ≥ 0, got {margin}")));
    }
    let half = margin / 2.0;
    let x0 = (x - half).max(0.0).floor();
    let y0 = (y - half).max(0.0).floor();
    let x1 = (x + w + half).min(image_width as f64).ceil();
    let y1 = (y + h + half).min(image_height as f64).ceil();
    if !(x1 > x0 && y1 > y0) {
        return Err(DataError::Crop(format!(
            "box {bbox:?} does not intersect the {image_width}×{image_height} image"
        )));
    }
    Ok(CropRegion {
        x: x0 as u32,
        y: y0 as u32,
        width: (x1 - x0) as u32,
        height: (y1 - y0) as u32,
    })
}

/// Margin-expanded, clamped crop of `bbox`, resized to `out_size × out_size`.
pub fn crop_with_margin(
    image: &RgbImage,
    bbox: [f64; 4],
    margin: f64,
    out_size: u32,
) -> Result<RgbImage, DataError> {
    let r = crop_region(image.width(), image.height(), bbox, margin)?;
    let sub = image::imageops::crop_imm(image, r.x, r.y, r.width, r.height).to_image();
    resize_bilinear(&sub, out_size, out_size)
}

/// Bilinear resampling with pixel-center alignment and edge clamping;
/// no low-pass prefilter when shrinking.
pub fn resize_bilinear(src: &RgbImage, width: u32, height: u32) -> Result<RgbImage, DataError> {
    if width == 0 || height == 0 || src.width() == 0 || src.height() == 0 {
        return Err(DataError::Crop("resize to or from an empty image".into()));
    }
    let (sw, sh) = (src.width() as usize, src.height() as usize);
    let raw = src.as_raw();
    let sx = sw as f64 / width as f64;
    let sy = sh as f64 / height as f64;
    let taps = |o: u32, scale: f64, n: usize| {
        let p = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = p.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, p - i0 as f64)
    };
    let cols: Vec<_> = (0..width).map(|o| taps(o, sx, sw)).collect();
    let mut out = RgbImage::new(width, height);
    for oy in 0..height {
        let (y0, y1, fy) = taps(oy, sy, sh);
        for (ox, &(x0, x1, fx)) in cols.iter().enumerate() {
            let px = |x: usize, y: usize, c: usize| raw[(y * sw + x) * 3 + c] as f64;
            let mut rgb = [0u8; 3];
            for (c, v) in rgb.iter_mut().enumerate() {
                let top = px(x0, y0, c) * (1.0 - fx) + px(x1, y0, c) * fx;
                let bot = px(x0, y1, c) * (1.0 - fx) + px(x1, y1, c) * fx;
                *v = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
            }
            out.put_pixel(ox as u32, oy, image::Rgb(rgb));
        }
    }
    Ok(out)
}
