use std::path::Path;

use image::RgbImage;

use super::CliError;

/// Tiles `images` row-major into a `rows × cols` composite without padding.
pub fn render_grid(images: &[RgbImage], rows: usize, cols: usize) -> Result<RgbImage, CliError> {
    if rows * cols != images.len() || images.is_empty() {
        return Err(CliError::Usage(format!(
            "{} images cannot fill a {rows}×{cols} grid",
            images.len()
        )));
    }
    let (w, h) = images[0].dimensions();
    if images.iter().any(|i| i.dimensions() != (w, h)) {
        return Err(CliError::Usage("grid cells differ in size".into()));
    }
    let mut out = RgbImage::new(w * cols as u32, h * rows as u32);
    for (k, img) in images.iter().enumerate() {
        let (r, c) = ((k / cols) as u32, (k % cols) as u32);
        for (x, y, p) in img.enumerate_pixels() {
            out.put_pixel(c * w + x, r * h + y, *p);
        }
    }
    Ok(out)
}

pub(crate) fn save_png(img: &RgbImage, path: &Path) -> Result<(), CliError> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
