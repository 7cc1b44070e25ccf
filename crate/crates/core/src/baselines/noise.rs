//! Seeded additive Gaussian noise and the (mu, sigma) sweep.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Flagged, Result, Warning};
use crate::image::{Angiogram, IntensityScale, PixelRegion};
use crate::metrics::noise_intensity;

pub const MU_RANGE: (f64, f64) = (0.001, 0.1);
pub const SIGMA_RANGE: (f64, f64) = (0.001, 0.05);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseParams {
    pub fn in_sweep_range(&self) -> bool {
        let tol = 1e-12;
        (MU_RANGE.0 - tol..=MU_RANGE.1 + tol).contains(&self.mu)
            && (SIGMA_RANGE.0 - tol..=SIGMA_RANGE.1 + tol).contains(&self.sigma)
    }
}

/// `clamp(img + N(mu, sigma^2), 0, 1)` with one independent draw per pixel
/// in raster order. Parameters outside the sweep ranges are allowed but
/// flagged.
pub fn add_gaussian_noise(img: &Angiogram, p: &NoiseParams) -> Result<Flagged<Angiogram>> {
    add_noise_with(img, p, ChaCha8Rng::seed_from_u64(p.seed))
}

fn add_noise_with(img: &Angiogram, p: &NoiseParams, mut rng: ChaCha8Rng) -> Result<Flagged<Angiogram>> {
    if img.scale() != IntensityScale::Unit {
        return Err(Error::invalid("noise is added to Unit-scale images"));
    }
    let dist = Normal::new(p.mu, p.sigma)
        .map_err(|e| Error::invalid(format!("noise parameters mu={} sigma={}: {e}", p.mu, p.sigma)))?;
    let px = img
        .pixels()
        .iter()
        .map(|&v| (v as f64 + dist.sample(&mut rng)).clamp(0.0, 1.0) as f32)
        .collect();
    let out = img.map_pixels(px)?;
    Ok(if p.in_sweep_range() {
        Flagged::ok(out)
    } else {
        Flagged::warn(
            out,
            Warning::NoiseParamsOutOfRange {
                mu: p.mu,
                sigma: p.sigma,
            },
        )
    })
}

/// Arithmetic grids `start + k * step` up to and including `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseGrid {
    pub mu_start: f64,
    pub mu_step: f64,
    pub mu_max: f64,
    pub sigma_start: f64,
    pub sigma_step: f64,
    pub sigma_max: f64,
}

impl Default for NoiseGrid {
    fn default() -> Self {
        NoiseGrid {
            mu_start: MU_RANGE.0,
            mu_step: 0.005,
            mu_max: MU_RANGE.1,
            sigma_start: SIGMA_RANGE.0,
            sigma_step: 0.005,
            sigma_max: SIGMA_RANGE.1,
        }
    }
}

fn steps(start: f64, step: f64, max: f64) -> Vec<f64> {
    if !(step > 0.0) || start > max {
        return Vec::new();
    }
    (0..)
        .map(|k| start + k as f64 * step)
        .take_while(|&v| v <= max + 1e-12)
        .collect()
}

impl NoiseGrid {
    pub fn mus(&self) -> Vec<f64> {
        steps(self.mu_start, self.mu_step, self.mu_max)
    }

    pub fn sigmas(&self) -> Vec<f64> {
        steps(self.sigma_start, self.sigma_step, self.sigma_max)
    }

    pub fn len(&self) -> usize {
        self.mus().len() * self.sigmas().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub mu_index: usize,
    pub sigma_index: usize,
    pub params: NoiseParams,
    pub noisy: Angiogram,
    /// Measured on the Raw255 scale over the sweep region.
    pub noise_intensity: f64,
}

/// Generator for one sweep entry: the base seed picks the key and
/// (image, mu index, sigma index) pick an independent ChaCha stream.
pub fn entry_rng(base_seed: u64, image_index: usize, mu_index: usize, sigma_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(((image_index as u64) << 32) | ((mu_index as u64) << 16) | sigma_index as u64);
    rng
}

/// Every (mu, sigma) of `grid` applied to `denoised`, mu-major.
pub fn noise_sweep(
    denoised: &Angiogram,
    grid: &NoiseGrid,
    region: &PixelRegion,
    base_seed: u64,
    image_index: usize,
) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::with_capacity(grid.len());
    for (mi, &mu) in grid.mus().iter().enumerate() {
        for (si, &sigma) in grid.sigmas().iter().enumerate() {
            let params = NoiseParams {
                mu,
                sigma,
                seed: base_seed,
            };
            let noisy = add_noise_with(denoised, &params, entry_rng(base_seed, image_index, mi, si))?.logged();
            let measured = noise_intensity(&noisy.to_raw255(), region)?;
            out.push(SweepEntry {
                mu_index: mi,
                sigma_index: si,
                params,
                noisy,
                noise_intensity: measured,
            });
        }
    }
    Ok(out)
}
