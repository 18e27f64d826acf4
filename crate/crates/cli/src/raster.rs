//! Grayscale rasters of planar fields and binary PGM output.

use std::io::Write;

use medflow::LevelSetField;

use crate::error::CliError;

/// Row-major 8-bit image, row 0 at the top.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Gray level of the level-line overlay.
pub const OVERLAY: u8 = 128;

/// Value of the nearest cloud point at each pixel center of a `res x res`
/// grid over the bounding box of the domain, top row first.
pub fn sample_nearest(field: &LevelSetField, res: usize) -> Result<Vec<f64>, CliError> {
    if res < 16 {
        return Err(CliError::InvalidParameter(format!("raster resolution {res} below 16")));
    }
    let cloud = field.cloud();
    if cloud.dim() != 2 {
        return Err(CliError::InvalidParameter("rasters need a planar field".into()));
    }
    let (lo, ext) = (cloud.domain().lower(), cloud.domain().extent());
    let mut out = Vec::with_capacity(res * res);
    for j in 0..res {
        let y = lo[1] + ext[1] * ((res - j) as f64 - 0.5) / res as f64;
        for i in 0..res {
            let x = lo[0] + ext[0] * (i as f64 + 0.5) / res as f64;
            out.push(field.values()[cloud.nearest(&[x, y])]);
        }
    }
    Ok(out)
}

/// Maps the sampled range linearly onto `0..=255`; a constant field gives an
/// all-black image.
pub fn to_gray(values: &[f64], res: usize) -> GrayImage {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let pixels = values
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8 } else { 0 })
        .collect();
    GrayImage { width: res, height: res, pixels }
}

/// Marks pixels whose side of the level `q` differs from the pixel to the
/// right or below.
pub fn overlay_level(img: &mut GrayImage, values: &[f64], q: f64) {
    let (w, h) = (img.width, img.height);
    let above = |k: usize| values[k] >= q;
    for j in 0..h {
        for i in 0..w {
            let k = j * w + i;
            let right = i + 1 < w && above(k) != above(k + 1);
            let down = j + 1 < h && above(k) != above(k + w);
            if right || down {
                img.pixels[k] = OVERLAY;
            }
        }
    }
}

/// Nearest-point raster with an optional level-line overlay.
pub fn rasterize(field: &LevelSetField, res: usize, level: Option<f64>) -> Result<GrayImage, CliError> {
    let values = sample_nearest(field, res)?;
    let mut img = to_gray(&values, res);
    if let Some(q) = level {
        overlay_level(&mut img, &values, q);
    }
    Ok(img)
}

/// Binary PGM (P5, maxval 255) with one comment line.
pub fn write_pgm<W: Write>(w: &mut W, img: &GrayImage, comment: &str) -> std::io::Result<()> {
    write!(w, "P5\n{comment}\n{} {}\n255\n", img.width, img.height)?;
    w.write_all(&img.pixels)?;
    w.flush()
}
