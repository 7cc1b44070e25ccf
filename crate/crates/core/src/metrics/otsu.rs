//! Global Otsu threshold on a 256-bin histogram.

use crate::error::{Error, Result};
use crate::image::{Angiogram, IntensityScale};

/// Bin of a Raw255 value: nearest integer, clamped to 0..=255.
#[inline]
pub fn bin_of(v: f32) -> usize {
    (v.round() as i32).clamp(0, 255) as usize
}

pub fn histogram(img: &Angiogram) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in img.pixels() {
        hist[bin_of(v)] += 1;
    }
    hist
}

/// Between-class statistic for threshold `t` (background bins `< t`).
/// With n0, n1 the class sizes and s0, s1 the class intensity sums,
/// the between-class variance is proportional to `(n0 s1 - n1 s0)^2 / (n0 n1)`;
/// candidates are compared on that fraction without rounding when the
/// products fit in 128 bits.
#[derive(Debug, Clone, Copy)]
struct Split {
    num: u128,
    den: u128,
}

impl Split {
    fn of(n0: u64, s0: u64, n1: u64, s1: u64) -> Option<Split> {
        if n0 == 0 || n1 == 0 {
            return None;
        }
        let a = (n0 as i128 * s1 as i128 - n1 as i128 * s0 as i128).unsigned_abs();
        Some(Split {
            num: a.checked_mul(a)?,
            den: n0 as u128 * n1 as u128,
        })
    }

    fn greater_than(&self, other: &Split) -> bool {
        match (self.num.checked_mul(other.den), other.num.checked_mul(self.den)) {
            (Some(l), Some(r)) => l > r,
            _ => self.num as f64 / self.den as f64 > other.num as f64 / other.den as f64,
        }
    }
}

/// Between-class variance (population form) for background bins `< t`.
pub fn between_class_variance(hist: &[u64; 256], t: usize) -> f64 {
    let n: u64 = hist.iter().sum();
    let (mut n0, mut s0) = (0u64, 0u64);
    for (i, &h) in hist.iter().enumerate().take(t) {
        n0 += h;
        s0 += h * i as u64;
    }
    let s: u64 = hist.iter().enumerate().map(|(i, &h)| h * i as u64).sum();
    let (n1, s1) = (n - n0, s - s0);
    if n0 == 0 || n1 == 0 {
        return 0.0;
    }
    let (w0, w1) = (n0 as f64 / n as f64, n1 as f64 / n as f64);
    let d = s0 as f64 / n0 as f64 - s1 as f64 / n1 as f64;
    w0 * w1 * d * d
}

/// Threshold `t` in 1..=255 maximizing the between-class variance, where
/// pixels with bin `>= t` are foreground. Ties go to the smallest `t`.
pub fn otsu_threshold(img: &Angiogram) -> Result<u8> {
    if img.scale() != IntensityScale::Raw255 {
        return Err(Error::invalid("Otsu threshold expects a Raw255 image"));
    }
    let hist = histogram(img);
    otsu_from_histogram(&hist)
}

pub fn otsu_from_histogram(hist: &[u64; 256]) -> Result<u8> {
    if hist.iter().filter(|&&h| h > 0).count() < 2 {
        return Err(Error::ConstantImage("Otsu threshold"));
    }
    let n: u64 = hist.iter().sum();
    let s: u64 = hist.iter().enumerate().map(|(i, &h)| h * i as u64).sum();
    let (mut n0, mut s0) = (0u64, 0u64);
    let mut best: Option<(usize, Split)> = None;
    for t in 1..256 {
        n0 += hist[t - 1];
        s0 += hist[t - 1] * (t as u64 - 1);
        let split = match Split::of(n0, s0, n - n0, s - s0) {
            Some(sp) => sp,
            None => continue,
        };
        if best.as_ref().map_or(true, |(_, b)| split.greater_than(b)) {
            best = Some((t, split));
        }
    }
    // at least two occupied bins guarantee a split with both classes non-empty
    Ok(best.expect("two occupied bins").0 as u8)
}

/// Foreground mask of pixels at or above the threshold.
pub fn binarize(img: &Angiogram, threshold: u8) -> Vec<bool> {
    img.pixels().iter().map(|&v| bin_of(v) >= threshold as usize).collect()
}
