//! Orientation bank of even-symmetric Gabor kernels.

use serde::{Deserialize, Serialize};

use super::kernel::correlate;
use super::{rescale_to_255, require_raw};
use crate::error::{Flagged, Result};
use crate::image::Angiogram;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaborParams {
    pub orientations: usize,
    /// Wavelength of the cosine carrier, pixels.
    pub wavelength: f64,
    /// Gaussian envelope width across the ridge, pixels.
    pub sigma: f64,
    /// Envelope aspect ratio; below 1 stretches the kernel along the ridge.
    pub aspect: f64,
}

impl Default for GaborParams {
    fn default() -> Self {
        GaborParams {
            orientations: 8,
            wavelength: 6.0,
            sigma: 2.5,
            aspect: 0.5,
        }
    }
}

impl GaborParams {
    /// Ridge directions of the bank, radians in [0, pi).
    pub fn angles(&self) -> Vec<f64> {
        (0..self.orientations)
            .map(|k| k as f64 * std::f64::consts::PI / self.orientations as f64)
            .collect()
    }

    fn radius(&self) -> usize {
        (3.0 * self.sigma / self.aspect.min(1.0)).ceil() as usize
    }
}

/// Zero-mean kernel tuned to ridges running along direction `theta`
/// (x = column, y = row, angle measured from the x axis toward +y).
pub fn gabor_kernel(p: &GaborParams, theta: f64) -> (Vec<f64>, usize) {
    let rad = p.radius() as isize;
    let size = (2 * rad + 1) as usize;
    let (s, c) = theta.sin_cos();
    let mut k = Vec::with_capacity(size * size);
    for y in -rad..=rad {
        for x in -rad..=rad {
            let (x, y) = (x as f64, y as f64);
            let along = x * c + y * s;
            let across = -x * s + y * c;
            let env = (-(across * across + p.aspect * p.aspect * along * along) / (2.0 * p.sigma * p.sigma)).exp();
            k.push(env * (2.0 * std::f64::consts::PI * across / p.wavelength).cos());
        }
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    (k, size)
}

/// Raw response of every kernel in the bank, one buffer per orientation.
pub fn gabor_bank(img: &Angiogram, p: &GaborParams) -> Result<Vec<Vec<f64>>> {
    require_raw(img, "Gabor filter")?;
    let px: Vec<f64> = img.pixels().iter().map(|&v| v as f64).collect();
    Ok(p.angles()
        .into_iter()
        .map(|theta| {
            let (k, size) = gabor_kernel(p, theta);
            correlate(&px, img.height(), img.width(), &k, size)
        })
        .collect())
}

/// Maximum response over the bank, negatives clipped to zero, stretched so
/// the strongest response becomes 255.
pub fn gabor_enhance(img: &Angiogram, p: &GaborParams) -> Result<Flagged<Angiogram>> {
    let bank = gabor_bank(img, p)?;
    let n = img.pixels().len();
    let best: Vec<f64> = (0..n)
        .map(|i| bank.iter().map(|r| r[i]).fold(0.0f64, f64::max))
        .collect();
    // a zero-mean kernel on a flat patch leaves only rounding residue
    let (k, _) = gabor_kernel(p, 0.0);
    let floor = 1e-9 * 255.0 * k.iter().map(|v| v.abs()).sum::<f64>();
    rescale_to_255(img, best, floor, "Gabor")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::IntensityScale;

    #[test]
    fn kernel_is_zero_mean() {
        let (k, size) = gabor_kernel(&GaborParams::default(), 0.3);
        assert_eq!(size, 31);
        assert!(k.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn line_selects_matching_orientation() {
        let p = GaborParams::default();
        let n = 61;
        for (k, theta) in p.angles().into_iter().enumerate() {
            let (s, c) = theta.sin_cos();
            let px: Vec<f32> = (0..n * n)
                .map(|i| {
                    let (y, x) = ((i / n) as f64 - 30.0, (i % n) as f64 - 30.0);
                    let across = -x * s + y * c;
                    if across.abs() <= 0.5 {
                        255.0
                    } else {
                        0.0
                    }
                })
                .collect();
            let img = Angiogram::new("l", n, n, px, IntensityScale::Raw255, 3.0).unwrap();
            let bank = gabor_bank(&img, &p).unwrap();
            let center = 30 * n + 30;
            let argmax = (0..bank.len())
                .max_by(|&a, &b| bank[a][center].total_cmp(&bank[b][center]))
                .unwrap();
            assert_eq!(argmax, k);
        }
    }
}
