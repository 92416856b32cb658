//! No-reference fusion quality metrics on the [0,255] intensity scale.

use crate::error::{Error, Result};
use crate::grid::{quantize, Image};

const SCALE: f64 = 255.0;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub ag: f64,
    pub en: f64,
    pub sf: f64,
    pub ei: f64,
}

pub fn metric_report(img: &Image) -> Result<MetricReport> {
    Ok(MetricReport {
        ag: ag(img)?,
        en: en(img),
        sf: sf(img)?,
        ei: ei(img)?,
    })
}

/// Average gradient.
///
/// Each 2×2 cell contributes `sqrt((gx² + gy²)/2)` where `gx` (`gy`) is the
/// mean of the cell's two horizontal (vertical) forward differences; the
/// result is the mean over all `(H−1)(W−1)` cells.
pub fn ag(img: &Image) -> Result<f64> {
    let (h, w) = img.dims();
    if h < 2 || w < 2 {
        return Err(Error::InvalidParameter(format!(
            "average gradient needs at least 2x2 pixels, got {h}x{w}"
        )));
    }
    let mut acc = 0.0;
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let (a, b) = (img.get(y, x), img.get(y, x + 1));
            let (c, d) = (img.get(y + 1, x), img.get(y + 1, x + 1));
            let gx = 0.5 * ((b - a) + (d - c)) * SCALE;
            let gy = 0.5 * ((c - a) + (d - b)) * SCALE;
            acc += ((gx * gx + gy * gy) / 2.0).sqrt();
        }
    }
    Ok(acc / ((h - 1) * (w - 1)) as f64)
}

/// Shannon entropy in bits of the 256-bin histogram of the 8-bit image.
pub fn en(img: &Image) -> f64 {
    let mut hist = [0usize; 256];
    for &v in img.data() {
        hist[quantize(v) as usize] += 1;
    }
    let n = img.len() as f64;
    -hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
        + 0.0
}

/// Spatial frequency `sqrt(RF² + CF²)`; an axis of length one contributes
/// nothing.
pub fn sf(img: &Image) -> Result<f64> {
    let (h, w) = img.dims();
    if h < 2 && w < 2 {
        return Err(Error::InvalidParameter(
            "spatial frequency needs more than one pixel".into(),
        ));
    }
    let mut rf = 0.0;
    if w > 1 {
        for y in 0..h {
            for x in 0..w - 1 {
                let d = (img.get(y, x + 1) - img.get(y, x)) * SCALE;
                rf += d * d;
            }
        }
        rf /= (h * (w - 1)) as f64;
    }
    let mut cf = 0.0;
    if h > 1 {
        for y in 0..h - 1 {
            for x in 0..w {
                let d = (img.get(y + 1, x) - img.get(y, x)) * SCALE;
                cf += d * d;
            }
        }
        cf /= ((h - 1) * w) as f64;
    }
    Ok((rf + cf).sqrt())
}

/// Edge intensity: mean Sobel gradient magnitude, replicate boundary.
pub fn ei(img: &Image) -> Result<f64> {
    let (h, w) = img.dims();
    if h < 3 || w < 3 {
        return Err(Error::InvalidParameter(format!(
            "edge intensity needs at least 3x3 pixels, got {h}x{w}"
        )));
    }
    let at = |y: isize, x: isize| {
        img.get(
            y.clamp(0, h as isize - 1) as usize,
            x.clamp(0, w as isize - 1) as usize,
        ) * SCALE
    };
    let mut acc = 0.0;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let sx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
            let sy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
            acc += (sx * sx + sy * sy).sqrt();
        }
    }
    Ok(acc / (h * w) as f64)
}
