//! Classical filters used as baselines and inside the data pipeline:
//! Gabor and Frangi enhancement, bilateral and median smoothing, Gaussian
//! blur, and the seeded noise injector for false-flow experiments.

mod filters;
mod frangi;
mod gabor;
mod kernel;
mod noise;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use filters::{bilateral, median_filter, BilateralParams};
pub use frangi::{frangi_raw, frangi_vesselness, vesselness_at_scale, FrangiParams};
pub use gabor::{gabor_bank, gabor_enhance, gabor_kernel, GaborParams};
pub use kernel::{correlate, gaussian_blur, gaussian_kernel, gaussian_radius, separable};
pub use noise::{
    add_gaussian_noise, entry_rng, noise_sweep, NoiseGrid, NoiseParams, SweepEntry, MU_RANGE, SIGMA_RANGE,
};

use crate::error::{Error, Flagged, Result, Warning};
use crate::image::{Angiogram, IntensityScale};

pub(crate) fn require_raw(img: &Angiogram, what: &str) -> Result<()> {
    if img.scale() != IntensityScale::Raw255 {
        return Err(Error::invalid(format!("{what} expects a Raw255 image")));
    }
    Ok(())
}

/// Scales `values` so the maximum maps to 255 (negatives clipped). A
/// maximum at or below `floor` is treated as a flat response: zeros plus a
/// warning.
pub(crate) fn rescale_to_255(
    like: &Angiogram,
    values: Vec<f64>,
    floor: f64,
    filter: &'static str,
) -> Result<Flagged<Angiogram>> {
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    if max <= floor {
        let zeros = like.to_raw255().map_pixels(vec![0.0; values.len()])?;
        return Ok(Flagged::warn(zeros, Warning::FlatResponse(filter)));
    }
    let px = values.iter().map(|&v| (v.max(0.0) / max * 255.0) as f32).collect();
    Ok(Flagged::ok(like.to_raw255().map_pixels(px)?))
}

/// Parameters of every classical filter, kept together so reports can
/// print the exact settings they were produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    pub gabor: GaborParams,
    pub frangi: FrangiParams,
    pub bilateral: BilateralParams,
    pub median_window: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            gabor: GaborParams::default(),
            frangi: FrangiParams::default(),
            bilateral: BilateralParams::default(),
            median_window: 3,
        }
    }
}

impl fmt::Display for FilterParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = &self.gabor;
        writeln!(
            f,
            "gabor: orientations={} wavelength={} sigma={} aspect={}",
            g.orientations, g.wavelength, g.sigma, g.aspect
        )?;
        let scales: Vec<String> = self.frangi.scales.iter().map(|s| s.to_string()).collect();
        writeln!(f, "frangi: scales={} beta={}", scales.join(","), self.frangi.beta)?;
        writeln!(
            f,
            "bilateral: spatial_sigma={} range_sigma={}",
            self.bilateral.spatial_sigma, self.bilateral.range_sigma
        )?;
        write!(f, "median: window={}", self.median_window)
    }
}
