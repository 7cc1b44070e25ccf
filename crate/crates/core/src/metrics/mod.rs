//! Image-quality metrics on the Raw255 scale: FAZ noise intensity, RMS
//! contrast, vessel connectivity and false-flow intensity.

mod otsu;
mod skeleton;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use otsu::{between_class_variance, bin_of, binarize, histogram, otsu_from_histogram, otsu_threshold};
pub use skeleton::{components_8, skeletonize, SkeletonMap};

use crate::error::{Error, Flagged, Result, Warning};
use crate::image::{circular_region, Angiogram, IntensityScale, PixelRegion};

/// Components with fewer pixels than this do not count as connected flow.
pub const MIN_COMPONENT_PIXELS: usize = 5;

/// Default FAZ measurement circle diameter.
pub const FAZ_DIAMETER_MM: f64 = 0.3;

fn require_raw(img: &Angiogram, what: &str) -> Result<()> {
    if img.scale() != IntensityScale::Raw255 {
        return Err(Error::invalid(format!("{what} expects a Raw255 image")));
    }
    Ok(())
}

fn check_region(img: &Angiogram, region: &PixelRegion) -> Result<()> {
    if (region.height(), region.width()) != (img.height(), img.width()) {
        return Err(Error::ShapeMismatch {
            op: "region",
            left: vec![img.height(), img.width()],
            right: vec![region.height(), region.width()],
        });
    }
    Ok(())
}

/// Mean squared intensity over `region`.
pub fn noise_intensity(img: &Angiogram, region: &PixelRegion) -> Result<f64> {
    require_raw(img, "noise intensity")?;
    check_region(img, region)?;
    let sum: f64 = region
        .coords()
        .iter()
        .map(|&(r, c)| {
            let v = img.get(r, c) as f64;
            v * v
        })
        .sum();
    Ok(sum / region.pixel_count() as f64)
}

/// Same measurement as [`noise_intensity`], taken on a reconstruction over
/// a region that carries no flow.
pub fn false_flow_intensity(img: &Angiogram, region: &PixelRegion) -> Result<f64> {
    noise_intensity(img, region)
}

/// Standard deviation of all pixel intensities (population form).
pub fn rms_contrast(img: &Angiogram) -> Result<f64> {
    require_raw(img, "RMS contrast")?;
    let n = img.pixels().len() as f64;
    let mean = img.pixels().iter().map(|&v| v as f64).sum::<f64>() / n;
    let ss: f64 = img.pixels().iter().map(|&v| (v as f64 - mean).powi(2)).sum();
    Ok((ss / n).sqrt())
}

/// Fraction of skeleton pixels lying in components of at least
/// [`MIN_COMPONENT_PIXELS`] pixels. An empty skeleton gives 0 with a warning.
pub fn skeleton_connectivity(skeleton: &SkeletonMap) -> Flagged<f64> {
    let total: usize = skeleton.components.iter().map(Vec::len).sum();
    if total == 0 {
        return Flagged::warn(0.0, Warning::EmptySkeleton);
    }
    let connected: usize = skeleton
        .components
        .iter()
        .map(Vec::len)
        .filter(|&n| n >= MIN_COMPONENT_PIXELS)
        .sum();
    Flagged::ok(connected as f64 / total as f64)
}

/// Otsu binarization, thinning, then [`skeleton_connectivity`].
pub fn connectivity(img: &Angiogram) -> Result<Flagged<f64>> {
    require_raw(img, "connectivity")?;
    let t = otsu_threshold(img)?;
    let skeleton = skeletonize(&binarize(img, t), img.height(), img.width());
    Ok(skeleton_connectivity(&skeleton))
}

/// Where the noise region was placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    /// (row, col) in pixels.
    pub center: (f64, f64),
    pub diameter_mm: f64,
}

impl RegionSpec {
    pub fn centered(img: &Angiogram, diameter_mm: f64) -> Self {
        RegionSpec {
            center: img.center(),
            diameter_mm,
        }
    }

    pub fn region(&self, img: &Angiogram) -> Result<PixelRegion> {
        circular_region(img, self.center, self.diameter_mm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub image_id: String,
    pub region: RegionSpec,
    pub noise_intensity: f64,
    pub contrast_rms: f64,
    pub connectivity: f64,
    pub false_flow_intensity: Option<f64>,
}

impl MetricsReport {
    /// All metrics of one image. Unit images are scaled by 255 first.
    /// `false_flow` requests the false-flow reading over the same region.
    pub fn measure(img: &Angiogram, region: RegionSpec, false_flow: bool) -> Result<Flagged<MetricsReport>> {
        let raw = img.to_raw255();
        let pixels = region.region(&raw)?;
        let noise = noise_intensity(&raw, &pixels)?;
        let conn = connectivity(&raw)?;
        let report = MetricsReport {
            image_id: img.id().to_string(),
            region,
            noise_intensity: noise,
            contrast_rms: rms_contrast(&raw)?,
            connectivity: conn.value,
            false_flow_intensity: if false_flow { Some(noise) } else { None },
        };
        Ok(Flagged {
            value: report,
            warning: conn.warning,
        })
    }

    pub const CSV_HEADER: [&'static str; 8] = [
        "image_id",
        "region_row",
        "region_col",
        "region_diameter_mm",
        "noise_intensity",
        "contrast_rms",
        "connectivity",
        "false_flow_intensity",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.image_id.clone(),
            self.region.center.0.to_string(),
            self.region.center.1.to_string(),
            self.region.diameter_mm.to_string(),
            self.noise_intensity.to_string(),
            self.contrast_rms.to_string(),
            self.connectivity.to_string(),
            self.false_flow_intensity.map(|v| v.to_string()).unwrap_or_default(),
        ]
    }

    /// Parses one line produced by the `Display` impl.
    pub fn parse_record(line: &str) -> Result<MetricsReport> {
        let mut fields = std::collections::HashMap::new();
        for part in line.split_whitespace() {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("malformed metrics field `{part}`")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| -> Result<&str> {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::invalid(format!("metrics record lacks `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::invalid(format!("metrics field `{k}` is not a number")))
        };
        Ok(MetricsReport {
            image_id: get("image")?.to_string(),
            region: RegionSpec {
                center: (num("region_row")?, num("region_col")?),
                diameter_mm: num("region_diameter_mm")?,
            },
            noise_intensity: num("noise_intensity")?,
            contrast_rms: num("contrast_rms")?,
            connectivity: num("connectivity")?,
            false_flow_intensity: match fields.get("false_flow_intensity") {
                Some(_) => Some(num("false_flow_intensity")?),
                None => None,
            },
        })
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "image={} region_row={} region_col={} region_diameter_mm={} noise_intensity={} contrast_rms={} connectivity={}",
            self.image_id,
            self.region.center.0,
            self.region.center.1,
            self.region.diameter_mm,
            self.noise_intensity,
            self.contrast_rms,
            self.connectivity
        )?;
        if let Some(v) = self.false_flow_intensity {
            write!(f, " false_flow_intensity={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(w: usize, h: usize, px: Vec<f32>) -> Angiogram {
        Angiogram::new("m", w, h, px, IntensityScale::Raw255, 3.0).unwrap()
    }

    #[test]
    fn noise_cases() {
        let img = raw(3, 1, vec![0.0, 3.0, 4.0]);
        let all = PixelRegion::from_mask(&[true; 3], 1, 3).unwrap();
        assert!((noise_intensity(&img, &all).unwrap() - 25.0 / 3.0).abs() < 1e-12);
        let zero = raw(3, 1, vec![0.0; 3]);
        assert_eq!(noise_intensity(&zero, &all).unwrap(), 0.0);
        let two = raw(2, 1, vec![10.0, 10.0]);
        let r2 = PixelRegion::from_mask(&[true; 2], 1, 2).unwrap();
        assert_eq!(false_flow_intensity(&two, &r2).unwrap(), 100.0);
    }

    #[test]
    fn contrast_cases() {
        assert_eq!(rms_contrast(&raw(2, 2, vec![9.0; 4])).unwrap(), 0.0);
        assert_eq!(rms_contrast(&raw(4, 1, vec![0.0, 255.0, 0.0, 255.0])).unwrap(), 127.5);
        let mut half = vec![0.0; 8];
        half.extend(vec![255.0; 8]);
        assert_eq!(rms_contrast(&raw(4, 4, half)).unwrap(), 127.5);
    }

    #[test]
    fn unit_images_rejected() {
        let u = Angiogram::new("u", 2, 1, vec![0.1, 0.2], IntensityScale::Unit, 3.0).unwrap();
        assert!(rms_contrast(&u).is_err());
    }

    #[test]
    fn connectivity_counts() {
        // one 10-pixel and one 3-pixel component
        let (h, w) = (5, 12);
        let mut px = vec![false; h * w];
        for c in 0..10 {
            px[c] = true;
        }
        for c in 0..3 {
            px[4 * w + c] = true;
        }
        let s = SkeletonMap::from_pixels(px, h, w);
        let v = skeleton_connectivity(&s);
        assert!((v.value - 10.0 / 13.0).abs() < 1e-12);
        assert!(v.warning.is_none());

        let mut small = vec![false; h * w];
        small[0] = true;
        small[2 * w + 5] = true;
        assert_eq!(skeleton_connectivity(&SkeletonMap::from_pixels(small, h, w)).value, 0.0);

        let empty = skeleton_connectivity(&SkeletonMap::from_pixels(vec![false; 4], 2, 2));
        assert_eq!(empty.value, 0.0);
        assert_eq!(empty.warning, Some(Warning::EmptySkeleton));
    }

    #[test]
    fn long_vessel_is_fully_connected() {
        let (h, w) = (9, 30);
        let px: Vec<f32> = (0..h * w).map(|i| if (3..6).contains(&(i / w)) { 220.0 } else { 10.0 }).collect();
        let v = connectivity(&raw(w, h, px)).unwrap();
        assert_eq!(v.value, 1.0);
    }

    #[test]
    fn report_round_trips_through_text() {
        let report = MetricsReport {
            image_id: "img7".into(),
            region: RegionSpec {
                center: (31.5, 31.5),
                diameter_mm: 0.3,
            },
            noise_intensity: 12.25,
            contrast_rms: 40.125,
            connectivity: 0.875,
            false_flow_intensity: Some(12.25),
        };
        let line = report.to_string();
        assert_eq!(MetricsReport::parse_record(&line).unwrap(), report);
        let no_ff = MetricsReport {
            false_flow_intensity: None,
            ..report
        };
        assert_eq!(MetricsReport::parse_record(&no_ff.to_string()).unwrap(), no_ff);
    }
}
