//! Edge-preserving smoothing: bilateral and median filters.

use serde::{Deserialize, Serialize};

use super::kernel::{clamp_index, gaussian_radius};
use super::require_raw;
use crate::error::{Error, Result};
use crate::image::Angiogram;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilateralParams {
    /// Pixels.
    pub spatial_sigma: f64,
    /// Raw255 intensity units.
    pub range_sigma: f64,
}

impl Default for BilateralParams {
    fn default() -> Self {
        BilateralParams {
            spatial_sigma: 2.0,
            range_sigma: 25.0,
        }
    }
}

/// Weighted mean over a `ceil(3 * spatial_sigma)` neighborhood (edges
/// clamped) with weights `exp(-d^2 / 2 ss^2) * exp(-dI^2 / 2 sr^2)`.
/// An infinite `range_sigma` reduces to a Gaussian blur.
pub fn bilateral(img: &Angiogram, p: &BilateralParams) -> Result<Angiogram> {
    require_raw(img, "bilateral filter")?;
    if !(p.spatial_sigma > 0.0 && p.spatial_sigma.is_finite()) || !(p.range_sigma > 0.0) {
        return Err(Error::invalid(format!(
            "bilateral sigmas must be positive, got {} and {}",
            p.spatial_sigma, p.range_sigma
        )));
    }
    let (h, w) = (img.height(), img.width());
    let px = img.pixels();
    let rad = gaussian_radius(p.spatial_sigma) as isize;
    let spatial: Vec<f64> = (-rad..=rad)
        .map(|d| (-((d * d) as f64) / (2.0 * p.spatial_sigma * p.spatial_sigma)).exp())
        .collect();
    let inv_range = 1.0 / (2.0 * p.range_sigma * p.range_sigma);
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let center = px[r * w + c] as f64;
            let (mut num, mut den) = (0.0, 0.0);
            for dr in -rad..=rad {
                let rr = clamp_index(r as isize + dr, h);
                let wr = spatial[(dr + rad) as usize];
                for dc in -rad..=rad {
                    let v = px[rr * w + clamp_index(c as isize + dc, w)] as f64;
                    let d = v - center;
                    let wt = wr * spatial[(dc + rad) as usize] * (-d * d * inv_range).exp();
                    num += wt * v;
                    den += wt;
                }
            }
            out.push((num / den) as f32);
        }
    }
    img.map_pixels(out)
}

/// Median over a `window x window` neighborhood with clamped edges.
pub fn median_filter(img: &Angiogram, window: usize) -> Result<Angiogram> {
    if window % 2 == 0 {
        return Err(Error::invalid(format!("median window must be odd, got {window}")));
    }
    let (h, w) = (img.height(), img.width());
    let px = img.pixels();
    let rad = (window / 2) as isize;
    let mut buf = Vec::with_capacity(window * window);
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            buf.clear();
            for dr in -rad..=rad {
                let rr = clamp_index(r as isize + dr, h);
                for dc in -rad..=rad {
                    buf.push(px[rr * w + clamp_index(c as isize + dc, w)]);
                }
            }
            let mid = buf.len() / 2;
            let (_, m, _) = buf.select_nth_unstable_by(mid, f32::total_cmp);
            out.push(*m);
        }
    }
    img.map_pixels(out)
}
