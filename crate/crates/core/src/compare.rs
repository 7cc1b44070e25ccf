//! Side-by-side metrics for the original images, the classical filters and
//! the network, summarized as mean and standard deviation per method.

use std::fmt;

use crate::baselines::{frangi_vesselness, gabor_enhance, FilterParams};
use crate::error::{Error, Result};
use crate::image::Angiogram;
use crate::metrics::{MetricsReport, RegionSpec};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Original,
    Gabor,
    Frangi,
    Harnet,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Original, Method::Gabor, Method::Frangi, Method::Harnet];

    pub fn name(self) -> &'static str {
        match self {
            Method::Original => "Original",
            Method::Gabor => "Gabor",
            Method::Frangi => "Frangi",
            Method::Harnet => "HARNet",
        }
    }

    /// Applies the method; the result is on the Raw255 scale.
    pub fn apply(self, img: &Angiogram, filters: &FilterParams, model: Option<&Model>) -> Result<Angiogram> {
        let raw = img.to_raw255();
        match self {
            Method::Original => Ok(raw),
            Method::Gabor => Ok(gabor_enhance(&raw, &filters.gabor)?.logged()),
            Method::Frangi => Ok(frangi_vesselness(&raw, &filters.frangi)?.logged()),
            Method::Harnet => {
                let model = model.ok_or_else(|| Error::invalid("HARNet comparison needs a model"))?;
                Ok(model.reconstruct(&img.to_unit())?.to_raw255())
            }
        }
    }
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Stat { mean, std, n }
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub noise_intensity: Stat,
    pub contrast_rms: Stat,
    pub connectivity: Stat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Per-image readings, method-major in `Method::ALL` order.
    pub records: Vec<(Method, MetricsReport)>,
}

impl Comparison {
    pub fn summary(&self) -> Vec<MethodSummary> {
        Method::ALL
            .iter()
            .filter(|m| self.records.iter().any(|(rm, _)| rm == *m))
            .map(|&method| {
                let pick = |f: fn(&MetricsReport) -> f64| -> Stat {
                    let v: Vec<f64> = self.records.iter().filter(|(m, _)| *m == method).map(|(_, r)| f(r)).collect();
                    Stat::of(&v)
                };
                MethodSummary {
                    method,
                    noise_intensity: pick(|r| r.noise_intensity),
                    contrast_rms: pick(|r| r.contrast_rms),
                    connectivity: pick(|r| r.connectivity),
                }
            })
            .collect()
    }

    pub fn summary_for(&self, method: Method) -> Option<MethodSummary> {
        self.summary().into_iter().find(|s| s.method == method)
    }

    pub const SUMMARY_HEADER: [&'static str; 8] = [
        "method",
        "n",
        "noise_mean",
        "noise_std",
        "contrast_mean",
        "contrast_std",
        "connectivity_mean",
        "connectivity_std",
    ];

    pub fn summary_records(&self) -> Vec<Vec<String>> {
        self.summary()
            .iter()
            .map(|s| {
                vec![
                    s.method.name().to_string(),
                    s.noise_intensity.n.to_string(),
                    s.noise_intensity.mean.to_string(),
                    s.noise_intensity.std.to_string(),
                    s.contrast_rms.mean.to_string(),
                    s.contrast_rms.std.to_string(),
                    s.connectivity.mean.to_string(),
                    s.connectivity.std.to_string(),
                ]
            })
            .collect()
    }

    /// Per-image rows: the method name followed by the metrics record.
    pub fn image_records(&self) -> Vec<Vec<String>> {
        self.records
            .iter()
            .map(|(m, r)| {
                let mut row = vec![m.name().to_string()];
                row.extend(r.csv_record());
                row
            })
            .collect()
    }

    pub fn image_header() -> Vec<&'static str> {
        let mut h = vec!["method"];
        h.extend(MetricsReport::CSV_HEADER);
        h
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>24} {:>24} {:>24}", "method", "noise", "contrast", "connectivity")?;
        for s in self.summary() {
            writeln!(
                f,
                "{:<10} {:>24} {:>24} {:>24}",
                s.method.name(),
                s.noise_intensity.to_string(),
                s.contrast_rms.to_string(),
                s.connectivity.to_string()
            )?;
        }
        Ok(())
    }
}

/// Measures every method on every image. Without a model the HARNet row
/// is left out. The noise region is centered on each image.
pub fn compare_methods(
    images: &[Angiogram],
    filters: &FilterParams,
    model: Option<&Model>,
    diameter_mm: f64,
) -> Result<Comparison> {
    if images.is_empty() {
        return Err(Error::invalid("comparison needs at least one image"));
    }
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| *m != Method::Harnet || model.is_some())
        .collect();
    let mut records = Vec::with_capacity(methods.len() * images.len());
    for &method in &methods {
        for img in images {
            let out = method.apply(img, filters, model)?.with_id(img.id());
            let report = MetricsReport::measure(&out, RegionSpec::centered(&out, diameter_mm), false)?.logged();
            records.push((method, report));
        }
    }
    Ok(Comparison { records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_hand_values() {
        let s = Stat::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(s.mean, 5.0);
        assert!((s.std - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(Stat::of(&[3.5]).std, 0.0);
        assert!(Stat::of(&[]).mean.is_nan());
    }
}
