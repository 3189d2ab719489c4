//! 8-bit PNG in and out. Pixels map to [0,1] by /255.

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor4};

/// Reads any PNG as a 1x3xHxW RGB tensor.
pub fn load_png(path: impl AsRef<Path>) -> Result<Tensor4> {
    let img = image::open(path.as_ref())?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(Tensor4::from_fn(
        Shape4::new(1, 3, h as usize, w as usize),
        |_, c, y, x| img.get_pixel(x as u32, y as u32)[c] as f64 / 255.0,
    ))
}

/// Writes the first item of `image` as an 8-bit RGB PNG. One-channel
/// tensors are written as grey; values are clamped to [0,1] and rounded.
pub fn save_png(path: impl AsRef<Path>, image: &Tensor4) -> Result<()> {
    let c = image.channels();
    if c != 1 && c != 3 {
        return Err(Error::InvalidArgument(format!(
            "PNG output needs 1 or 3 channels, got {c}"
        )));
    }
    let (h, w) = (image.height(), image.width());
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let buf: RgbImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let (y, x) = (y as usize, x as usize);
        let px = |ch: usize| q(image.get(0, if c == 1 { 0 } else { ch }, y, x));
        Rgb([px(0), px(1), px(2)])
    });
    buf.save(path.as_ref())?;
    Ok(())
}

/// PNG files directly inside `dir`, sorted by file name.
pub fn list_pngs(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Rounds to the nearest 8-bit level, as a save/load round trip would.
pub fn quantize(image: &Tensor4) -> Tensor4 {
    image.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
}
