//! Interpolation kernels: bicubic upsampling and bilinear point sampling.

use crate::error::{Error, Result};
use crate::image::Angiogram;

/// Keys cubic convolution weight with parameter `a`.
pub fn cubic_weight(x: f64, a: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

pub const CUBIC_A: f64 = -0.5;

/// Upsamples by an integer factor with the a = -0.5 cubic kernel and
/// clamped edges. Output pixel `o` samples source position `o / factor`,
/// so every `factor`-th output pixel reproduces a source pixel exactly.
/// The field of view is unchanged.
pub fn bicubic_upsample(img: &Angiogram, factor: usize) -> Result<Angiogram> {
    if factor == 0 {
        return Err(Error::invalid("upsampling factor must be >= 1"));
    }
    if factor == 1 {
        return Ok(img.clone());
    }
    let (h, w) = (img.height(), img.width());
    let (oh, ow) = (h * factor, w * factor);
    let src = img.pixels();

    // taps[o] = (first source index, four weights) per output coordinate
    let taps = |n_out: usize, n_in: usize| -> Vec<([usize; 4], [f64; 4])> {
        (0..n_out)
            .map(|o| {
                let s = o as f64 / factor as f64;
                let base = s.floor();
                let frac = s - base;
                let mut idx = [0usize; 4];
                let mut wts = [0.0; 4];
                for k in 0..4 {
                    let i = base as isize + k as isize - 1;
                    idx[k] = i.clamp(0, n_in as isize - 1) as usize;
                    wts[k] = cubic_weight(frac - (k as f64 - 1.0), CUBIC_A);
                }
                (idx, wts)
            })
            .collect()
    };
    let col_taps = taps(ow, w);
    let row_taps = taps(oh, h);

    let mut horizontal = vec![0.0f64; h * ow];
    for r in 0..h {
        let row = &src[r * w..(r + 1) * w];
        for (o, (idx, wts)) in col_taps.iter().enumerate() {
            horizontal[r * ow + o] = (0..4).map(|k| wts[k] * row[idx[k]] as f64).sum();
        }
    }
    let mut out = vec![0.0f32; oh * ow];
    for (o, (idx, wts)) in row_taps.iter().enumerate() {
        for c in 0..ow {
            let v: f64 = (0..4).map(|k| wts[k] * horizontal[idx[k] * ow + c]).sum();
            out[o * ow + c] = v as f32;
        }
    }
    let up = Angiogram::from_clamped(img.id(), ow, oh, out, img.scale(), img.fov_mm())?;
    Ok(up)
}

/// Keeps every `factor`-th pixel starting at (0, 0): the sampling pattern
/// of a scan with `factor` times fewer lines over the same field.
pub fn decimate(img: &Angiogram, factor: usize) -> Result<Angiogram> {
    if factor == 0 {
        return Err(Error::invalid("decimation factor must be >= 1"));
    }
    let (h, w) = (img.height().div_ceil(factor), img.width().div_ceil(factor));
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            out.push(img.get(r * factor, c * factor));
        }
    }
    Angiogram::new(img.id(), w, h, out, img.scale(), img.fov_mm())
}

/// Bilinear sample at continuous (x = col, y = row); `None` outside the
/// pixel-center hull.
#[inline]
pub fn bilinear(pixels: &[f32], width: usize, height: usize, x: f64, y: f64) -> Option<f64> {
    if !(x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64) {
        return None;
    }
    let x0 = (x.floor() as usize).min(width.saturating_sub(2));
    let y0 = (y.floor() as usize).min(height.saturating_sub(2));
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let p = |r: usize, c: usize| pixels[r * width + c] as f64;
    let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
    let bottom = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
    Some(top * (1.0 - fy) + bottom * fy)
}
