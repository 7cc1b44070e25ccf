//! Multi-scale Hessian vesselness for bright tubular structures.

use serde::{Deserialize, Serialize};

use super::kernel::{gaussian_radius, separable};
use super::{rescale_to_255, require_raw};
use crate::error::{Flagged, Result};
use crate::image::Angiogram;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrangiParams {
    /// Gaussian scales, pixels.
    pub scales: Vec<f64>,
    /// Blob-suppression width on the eigenvalue ratio.
    pub beta: f64,
}

impl Default for FrangiParams {
    fn default() -> Self {
        FrangiParams {
            scales: vec![1.0, 2.0, 3.0],
            beta: 0.5,
        }
    }
}

/// Sampled Gaussian and its first and second derivatives at one scale.
/// The derivative kernels annihilate constants exactly (first derivative
/// antisymmetric, second derivative shifted to zero sum).
fn derivative_kernels(sigma: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let r = gaussian_radius(sigma) as isize;
    let s2 = sigma * sigma;
    let g: Vec<f64> = (-r..=r).map(|x| (-((x * x) as f64) / (2.0 * s2)).exp()).collect();
    let norm: f64 = g.iter().sum();
    let g0: Vec<f64> = g.iter().map(|v| v / norm).collect();
    let g1: Vec<f64> = (-r..=r).zip(&g0).map(|(x, v)| -(x as f64) / s2 * v).collect();
    let mut g2: Vec<f64> = (-r..=r)
        .zip(&g0)
        .map(|(x, v)| ((x * x) as f64 - s2) / (s2 * s2) * v)
        .collect();
    let mean = g2.iter().sum::<f64>() / g2.len() as f64;
    g2.iter_mut().for_each(|v| *v -= mean);
    (g0, g1, g2)
}

/// Vesselness at a single scale, before any renormalization.
pub fn vesselness_at_scale(px: &[f64], h: usize, w: usize, sigma: f64, beta: f64) -> Vec<f64> {
    let (g0, g1, g2) = derivative_kernels(sigma);
    let s2 = sigma * sigma;
    let dxx = separable(px, h, w, &g2, &g0);
    let dyy = separable(px, h, w, &g0, &g2);
    let dxy = separable(px, h, w, &g1, &g1);
    let mut l1 = vec![0.0; h * w];
    let mut l2 = vec![0.0; h * w];
    let mut max_norm: f64 = 0.0;
    for i in 0..h * w {
        let (a, b, c) = (s2 * dxx[i], s2 * dyy[i], s2 * dxy[i]);
        let half_tr = 0.5 * (a + b);
        let disc = (0.25 * (a - b) * (a - b) + c * c).sqrt();
        let (e1, e2) = (half_tr + disc, half_tr - disc);
        // order by magnitude: |l1| <= |l2|
        let (small, large) = if e1.abs() <= e2.abs() { (e1, e2) } else { (e2, e1) };
        l1[i] = small;
        l2[i] = large;
        max_norm = max_norm.max((small * small + large * large).sqrt());
    }
    // rounding residue on flat input is far below any real structure
    if max_norm <= 1e-8 {
        return vec![0.0; h * w];
    }
    let c = 0.5 * max_norm;
    (0..h * w)
        .map(|i| {
            if l2[i] >= 0.0 {
                return 0.0;
            }
            let rb = l1[i] / l2[i];
            let s = (l1[i] * l1[i] + l2[i] * l2[i]).sqrt();
            (-(rb * rb) / (2.0 * beta * beta)).exp() * (1.0 - (-(s * s) / (2.0 * c * c)).exp())
        })
        .collect()
}

/// Maximum over scales of the single-scale vesselness, unnormalized.
pub fn frangi_raw(img: &Angiogram, p: &FrangiParams) -> Result<Vec<f64>> {
    require_raw(img, "Frangi filter")?;
    let px: Vec<f64> = img.pixels().iter().map(|&v| v as f64).collect();
    let (h, w) = (img.height(), img.width());
    let mut best = vec![0.0f64; h * w];
    for &s in &p.scales {
        for (b, v) in best.iter_mut().zip(vesselness_at_scale(&px, h, w, s, p.beta)) {
            *b = b.max(v);
        }
    }
    Ok(best)
}

pub fn frangi_vesselness(img: &Angiogram, p: &FrangiParams) -> Result<Flagged<Angiogram>> {
    let raw = frangi_raw(img, p)?;
    rescale_to_255(img, raw, 0.0, "Frangi")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::IntensityScale;

    fn raw_img(n: usize, f: impl Fn(f64, f64) -> f64) -> Angiogram {
        let px = (0..n * n).map(|i| f((i / n) as f64, (i % n) as f64) as f32).collect();
        Angiogram::new("f", n, n, px, IntensityScale::Raw255, 3.0).unwrap()
    }

    #[test]
    fn constant_gives_zero() {
        let img = raw_img(20, |_, _| 117.0);
        assert!(frangi_raw(&img, &FrangiParams::default()).unwrap().iter().all(|&v| v == 0.0));
        let out = frangi_vesselness(&img, &FrangiParams::default()).unwrap();
        assert!(out.value.pixels().iter().all(|&v| v == 0.0));
        assert!(out.warning.is_some());
    }

    #[test]
    fn ridge_peaks_on_centerline() {
        let img = raw_img(41, |r, _| 200.0 * (-(r - 20.0).powi(2) / (2.0 * 2.0f64.powi(2))).exp());
        let v = frangi_raw(&img, &FrangiParams::default()).unwrap();
        for c in [10, 20, 30] {
            let argmax = (0..41).max_by(|&a, &b| v[a * 41 + c].total_cmp(&v[b * 41 + c])).unwrap();
            assert_eq!(argmax, 20);
        }
    }

    #[test]
    fn blob_is_suppressed() {
        let gauss = |d2: f64| 200.0 * (-d2 / (2.0 * 4.0)).exp();
        let ridge = raw_img(41, |r, _| gauss((r - 20.0).powi(2)));
        let blob = raw_img(41, |r, c| gauss((r - 20.0).powi(2) + (c - 20.0).powi(2)));
        let p = FrangiParams::default();
        let to64 = |a: &Angiogram| a.pixels().iter().map(|&v| v as f64).collect::<Vec<_>>();
        let (h, w) = (41, 41);
        let vr = vesselness_at_scale(&to64(&ridge), h, w, 2.0, p.beta);
        let vb = vesselness_at_scale(&to64(&blob), h, w, 2.0, p.beta);
        // at the structure centers both Hessians peak, so the ratio is the
        // eigenvalue-ratio factor alone: exp(-1 / (2 beta^2)) = exp(-2)
        let center = 20 * w + 20;
        assert!(vb[center] < 0.2 * vr[center], "blob {} ridge {}", vb[center], vr[center]);
        let peak = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        assert!(peak(&vb) < peak(&vr));
    }
}
