//! False-flow experiment: denoise clean angiograms, add graded Gaussian
//! noise, reconstruct, and measure what the network paints into the FAZ.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::baselines::{gabor_enhance, median_filter, noise_sweep, GaborParams, NoiseGrid};
use crate::error::{Error, Result};
use crate::image::{Angiogram, IntensityScale};
use crate::metrics::{false_flow_intensity, noise_intensity, RegionSpec, FAZ_DIAMETER_MM};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FalseFlowConfig {
    pub grid: NoiseGrid,
    pub gabor: GaborParams,
    pub median_window: usize,
    pub region_diameter_mm: f64,
    /// Reconstructed FAZ intensity at or below this counts as no false flow.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for FalseFlowConfig {
    fn default() -> Self {
        FalseFlowConfig {
            grid: NoiseGrid::default(),
            gabor: GaborParams::default(),
            median_window: 3,
            region_diameter_mm: FAZ_DIAMETER_MM,
            epsilon: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalseFlowEntry {
    pub image_id: String,
    /// `None` for the denoised image itself.
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub noise_intensity: f64,
    pub false_flow_intensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FalseFlowReport {
    /// One per input image: the denoised, noise-free baseline.
    pub baselines: Vec<FalseFlowEntry>,
    /// Every (image, mu, sigma) of the sweep, image-major then mu-major.
    pub entries: Vec<FalseFlowEntry>,
    pub epsilon: f64,
}

impl FalseFlowReport {
    /// Largest input noise intensity N such that every sweep entry with
    /// noise at or below N stayed at or below `epsilon`. `None` when even
    /// the quietest entry produced false flow.
    pub fn clean_below(&self) -> Option<f64> {
        let mut sorted: Vec<&FalseFlowEntry> = self.entries.iter().collect();
        sorted.sort_by(|a, b| a.noise_intensity.total_cmp(&b.noise_intensity));
        let mut best = None;
        for e in sorted {
            if e.false_flow_intensity > self.epsilon {
                break;
            }
            best = Some(e.noise_intensity);
        }
        best
    }

    /// Quietest input that did produce false flow.
    pub fn first_false_flow(&self) -> Option<&FalseFlowEntry> {
        self.entries
            .iter()
            .filter(|e| e.false_flow_intensity > self.epsilon)
            .min_by(|a, b| a.noise_intensity.total_cmp(&b.noise_intensity))
    }

    pub const CSV_HEADER: [&'static str; 5] = ["image", "mu", "sigma", "noise_intensity", "false_flow_intensity"];

    /// Baselines first (empty mu and sigma), then the sweep.
    pub fn csv_records(&self) -> Vec<Vec<String>> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        self.baselines
            .iter()
            .chain(&self.entries)
            .map(|e| {
                vec![
                    e.image_id.clone(),
                    opt(e.mu),
                    opt(e.sigma),
                    e.noise_intensity.to_string(),
                    e.false_flow_intensity.to_string(),
                ]
            })
            .collect()
    }
}

impl fmt::Display for FalseFlowReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let max_noise = self.entries.iter().map(|e| e.noise_intensity).fold(0.0, f64::max);
        write!(
            f,
            "entries={} images={} epsilon={} max_noise_intensity={:.3} ",
            self.entries.len(),
            self.baselines.len(),
            self.epsilon,
            max_noise
        )?;
        match self.clean_below() {
            Some(n) => write!(f, "no_false_flow_up_to={n:.3}")?,
            None => write!(f, "no_false_flow_up_to=none")?,
        }
        if let Some(e) = self.first_false_flow() {
            write!(
                f,
                " first_false_flow_noise={:.3} first_false_flow_intensity={:.3}",
                e.noise_intensity, e.false_flow_intensity
            )?;
        }
        Ok(())
    }
}

/// Gabor enhancement followed by a median filter, Raw255 in and out.
pub fn denoise(img: &Angiogram, gabor: &GaborParams, median_window: usize) -> Result<Angiogram> {
    let enhanced = gabor_enhance(&img.to_raw255(), gabor)?.logged();
    median_filter(&enhanced, median_window)
}

fn measure_one(
    model: &Model,
    img: &Angiogram,
    image_index: usize,
    cfg: &FalseFlowConfig,
) -> Result<(FalseFlowEntry, Vec<FalseFlowEntry>)> {
    let denoised = denoise(img, &cfg.gabor, cfg.median_window)?;
    let region = RegionSpec::centered(img, cfg.region_diameter_mm).region(img)?;
    let rebuilt = |input: &Angiogram| -> Result<f64> {
        let out = model.reconstruct(&input.to_unit())?.to_raw255();
        false_flow_intensity(&out, &region)
    };
    let base = FalseFlowEntry {
        image_id: img.id().to_string(),
        mu: None,
        sigma: None,
        noise_intensity: noise_intensity(&denoised, &region)?,
        false_flow_intensity: rebuilt(&denoised)?,
    };
    let sweep = noise_sweep(&denoised.to_unit(), &cfg.grid, &region, cfg.seed, image_index)?;
    let entries = sweep
        .into_iter()
        .map(|s| {
            Ok(FalseFlowEntry {
                image_id: img.id().to_string(),
                mu: Some(s.params.mu),
                sigma: Some(s.params.sigma),
                noise_intensity: s.noise_intensity,
                false_flow_intensity: rebuilt(&s.noisy)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((base, entries))
}

/// Runs the sweep over `images` (any scale; typically clean angiograms).
/// Images are processed on separate threads; the output order and values
/// do not depend on scheduling.
pub fn false_flow_experiment(model: &Model, images: &[Angiogram], cfg: &FalseFlowConfig) -> Result<FalseFlowReport> {
    if images.is_empty() {
        return Err(Error::invalid("false-flow experiment needs at least one image"));
    }
    if cfg.grid.is_empty() {
        return Err(Error::invalid("noise grid is empty"));
    }
    if images.iter().any(|i| i.scale() != IntensityScale::Raw255 && i.scale() != IntensityScale::Unit) {
        return Err(Error::invalid("unsupported intensity scale"));
    }
    let results: Vec<Result<(FalseFlowEntry, Vec<FalseFlowEntry>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = images
            .iter()
            .enumerate()
            .map(|(k, img)| s.spawn(move || measure_one(model, img, k, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numerical("worker thread panicked".into()))))
            .collect()
    });
    let mut report = FalseFlowReport {
        baselines: Vec::with_capacity(images.len()),
        entries: Vec::with_capacity(images.len() * cfg.grid.len()),
        epsilon: cfg.epsilon,
    };
    for r in results {
        let (base, entries) = r?;
        report.baselines.push(base);
        report.entries.extend(entries);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    fn entry(noise: f64, ff: f64) -> FalseFlowEntry {
        FalseFlowEntry {
            image_id: "i".into(),
            mu: Some(0.0),
            sigma: Some(0.0),
            noise_intensity: noise,
            false_flow_intensity: ff,
        }
    }

    #[test]
    fn clean_below_stops_at_first_violation() {
        let report = FalseFlowReport {
            baselines: Vec::new(),
            entries: vec![entry(30.0, 0.2), entry(900.0, 4.0), entry(10.0, 0.0), entry(500.0, 0.9), entry(950.0, 0.1)],
            epsilon: 1.0,
        };
        assert_eq!(report.clean_below(), Some(500.0));
        assert_eq!(report.first_false_flow().unwrap().noise_intensity, 900.0);
        let all_bad = FalseFlowReport {
            entries: vec![entry(1.0, 2.0)],
            ..report
        };
        assert_eq!(all_bad.clean_below(), None);
    }

    #[test]
    fn identity_model_sweep_has_expected_shape() {
        let n = 48;
        let px: Vec<f32> = (0..n * n)
            .map(|i| if (i % n) % 12 == 0 && (i / n) < 12 { 200.0 } else { 0.0 })
            .collect();
        let img = Angiogram::new("a", n, n, px, IntensityScale::Raw255, 3.0).unwrap();
        let model = Model::build(ModelSpec::new(4, 1, 1, 4), 0).unwrap();
        let cfg = FalseFlowConfig {
            grid: NoiseGrid {
                mu_max: 0.011,
                sigma_max: 0.006,
                ..NoiseGrid::default()
            },
            ..FalseFlowConfig::default()
        };
        let report = false_flow_experiment(&model, &[img.clone(), img.with_id("b")], &cfg).unwrap();
        assert_eq!(report.baselines.len(), 2);
        assert_eq!(report.entries.len(), 2 * 3 * 2);
        assert_eq!(report.csv_records().len(), 2 + 12);
        // an untrained network is the identity, so false flow tracks the
        // noisy input up to 8-bit rounding
        for e in &report.entries {
            assert!((e.false_flow_intensity - e.noise_intensity).abs() <= 0.02 * e.noise_intensity + 1.0);
        }
    }
}
