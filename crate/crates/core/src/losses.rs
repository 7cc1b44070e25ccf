//! Training losses: pixel MSE, global SSIM and their sum `MSE + (1 - SSIM)`.
//!
//! SSIM uses whole-patch statistics (one mean, variance and covariance per
//! sample) with population moments. For a batch (N, C, H, W) each sample
//! gets its own SSIM and the batch value is their mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{self, BackwardFn, Scalar, Tensor};

/// Stabilizing constants of the SSIM ratio terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimConstants {
    pub c1: f64,
    pub c2: f64,
}

impl SsimConstants {
    /// C1 = 0.01, C2 = 0.03, used as the constants themselves.
    pub const PRINTED: SsimConstants = SsimConstants { c1: 0.01, c2: 0.03 };

    /// The `(K L)^2` form with K1 = 0.01, K2 = 0.03 and dynamic range L.
    pub fn literature(dynamic_range: f64) -> Self {
        SsimConstants {
            c1: (0.01 * dynamic_range).powi(2),
            c2: (0.03 * dynamic_range).powi(2),
        }
    }
}

impl Default for SsimConstants {
    fn default() -> Self {
        Self::PRINTED
    }
}

fn check_same<T: Scalar>(op: &'static str, x: &Tensor<T>, y: &Tensor<T>) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch {
            op,
            left: x.shape().to_vec(),
            right: y.shape().to_vec(),
        });
    }
    Ok(())
}

struct MseBackward;

impl<T: Scalar> BackwardFn<T> for MseBackward {
    fn name(&self) -> &'static str {
        "mse"
    }

    fn backward(&self, inputs: &[Tensor<T>], _output: &[T], g: &[T]) -> Result<Vec<Option<Vec<T>>>> {
        let (x, y) = (inputs[0].data(), inputs[1].data());
        let k = g[0] * T::from_f64_lossy(2.0 / x.len() as f64);
        let gx: Vec<T> = x.iter().zip(y.iter()).map(|(&a, &b)| k * (a - b)).collect();
        let gy = gx.iter().map(|&v| -v).collect();
        Ok(vec![Some(gx), Some(gy)])
    }
}

/// Mean of squared differences over every element.
pub fn mse<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>> {
    check_same("mse", x, y)?;
    let value = {
        let (xd, yd) = (x.data(), y.data());
        let s: f64 = xd
            .iter()
            .zip(yd.iter())
            .map(|(&a, &b)| {
                let d = (a - b).as_f64();
                d * d
            })
            .sum();
        s / xd.len() as f64
    };
    Tensor::from_op(
        vec![1],
        vec![T::from_f64_lossy(value)],
        vec![x.clone(), y.clone()],
        Box::new(MseBackward),
    )
}

/// First and second moments of one sample.
#[derive(Debug, Clone, Copy)]
struct Moments {
    mu_x: f64,
    mu_y: f64,
    var_x: f64,
    var_y: f64,
    cov: f64,
}

fn moments<T: Scalar>(x: &[T], y: &[T]) -> Moments {
    let n = x.len() as f64;
    let mu_x = x.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let mu_y = y.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let (mut var_x, mut var_y, mut cov) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a.as_f64() - mu_x, b.as_f64() - mu_y);
        var_x += da * da;
        var_y += db * db;
        cov += da * db;
    }
    Moments {
        mu_x,
        mu_y,
        var_x: var_x / n,
        var_y: var_y / n,
        cov: cov / n,
    }
}

/// SSIM of one sample from its moments. Written so swapping x and y gives
/// bit-identical results.
fn ssim_from(m: Moments, c: SsimConstants) -> f64 {
    let a = 2.0 * (m.mu_x * m.mu_y) + c.c1;
    let b = (m.mu_x * m.mu_x + m.mu_y * m.mu_y) + c.c1;
    let num = 2.0 * m.cov + c.c2;
    let den = (m.var_x + m.var_y) + c.c2;
    (a / b) * (num / den)
}

fn samples(shape: &[usize]) -> usize {
    if shape.len() == 4 {
        shape[0]
    } else {
        1
    }
}

struct SsimBackward {
    constants: SsimConstants,
    samples: usize,
}

impl<T: Scalar> BackwardFn<T> for SsimBackward {
    fn name(&self) -> &'static str {
        "ssim"
    }

    fn backward(&self, inputs: &[Tensor<T>], _output: &[T], g: &[T]) -> Result<Vec<Option<Vec<T>>>> {
        let (xd, yd) = (inputs[0].data(), inputs[1].data());
        let per = xd.len() / self.samples;
        let upstream = g[0].as_f64() / self.samples as f64;
        let (c1, c2) = (self.constants.c1, self.constants.c2);
        let mut gx = Vec::with_capacity(xd.len());
        let mut gy = Vec::with_capacity(yd.len());
        for s in 0..self.samples {
            let (xs, ys) = (&xd[s * per..(s + 1) * per], &yd[s * per..(s + 1) * per]);
            let m = moments(xs, ys);
            let n = per as f64;
            let a = 2.0 * m.mu_x * m.mu_y + c1;
            let b = m.mu_x * m.mu_x + m.mu_y * m.mu_y + c1;
            let num = 2.0 * m.cov + c2;
            let den = m.var_x + m.var_y + c2;
            let lum = a / b;
            let cs = num / den;
            // d lum / d x_i and d cs / d x_i for every i share these factors
            let dlum_dx = (2.0 * m.mu_y * b - a * 2.0 * m.mu_x) / (b * b) / n;
            let dlum_dy = (2.0 * m.mu_x * b - a * 2.0 * m.mu_y) / (b * b) / n;
            for (&xi, &yi) in xs.iter().zip(ys) {
                let (dx, dy) = (xi.as_f64() - m.mu_x, yi.as_f64() - m.mu_y);
                let dcs_dx = (2.0 * dy * den - num * 2.0 * dx) / (den * den) / n;
                let dcs_dy = (2.0 * dx * den - num * 2.0 * dy) / (den * den) / n;
                gx.push(T::from_f64_lossy(upstream * (dlum_dx * cs + lum * dcs_dx)));
                gy.push(T::from_f64_lossy(upstream * (dlum_dy * cs + lum * dcs_dy)));
            }
        }
        Ok(vec![Some(gx), Some(gy)])
    }
}

/// Mean over samples of the global-statistics SSIM.
pub fn ssim<T: Scalar>(x: &Tensor<T>, y: &Tensor<T>, constants: SsimConstants) -> Result<Tensor<T>> {
    check_same("ssim", x, y)?;
    let n_samples = samples(x.shape());
    let value = {
        let (xd, yd) = (x.data(), y.data());
        let per = xd.len() / n_samples;
        (0..n_samples)
            .map(|s| {
                let r = s * per..(s + 1) * per;
                ssim_from(moments(&xd[r.clone()], &yd[r]), constants)
            })
            .sum::<f64>()
            / n_samples as f64
    };
    Tensor::from_op(
        vec![1],
        vec![T::from_f64_lossy(value)],
        vec![x.clone(), y.clone()],
        Box::new(SsimBackward {
            constants,
            samples: n_samples,
        }),
    )
}

/// Component values of one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub mse: f64,
    pub ssim: f64,
    pub total: f64,
}

/// `MSE + (1 - SSIM)`, returning the differentiable total and its parts.
pub fn combined_loss<T: Scalar>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    constants: SsimConstants,
) -> Result<(Tensor<T>, LossBreakdown)> {
    let m = mse(x, y)?;
    let s = ssim(x, y, constants)?;
    let one_minus = tensor::add_scalar(&tensor::scale(&s, -T::one())?, T::one())?;
    let total = tensor::add(&m, &one_minus)?;
    let breakdown = LossBreakdown {
        mse: m.item()?.as_f64(),
        ssim: s.item()?.as_f64(),
        total: total.item()?.as_f64(),
    };
    Ok((total, breakdown))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(data: Vec<f64>) -> Tensor<f64> {
        let n = data.len();
        Tensor::from_vec(&[1, 1, 1, n], data).unwrap()
    }

    #[test]
    fn mse_cases() {
        let x = t(vec![0.2, 0.4, 0.9]);
        assert_eq!(mse(&x, &x).unwrap().item().unwrap(), 0.0);
        assert_eq!(mse(&t(vec![0.0; 4]), &t(vec![1.0; 4])).unwrap().item().unwrap(), 1.0);
        assert_eq!(mse(&t(vec![0.0, 1.0]), &t(vec![1.0, 3.0])).unwrap().item().unwrap(), 2.5);
    }

    #[test]
    fn mse_shape_mismatch() {
        assert!(matches!(
            mse(&t(vec![0.0; 3]), &t(vec![0.0; 4])),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn ssim_of_identical_is_one() {
        let x = t(vec![0.1, 0.5, 0.3, 0.8]);
        assert_eq!(ssim(&x, &x, SsimConstants::PRINTED).unwrap().item().unwrap(), 1.0);
        let c = t(vec![0.4; 4]);
        assert_eq!(ssim(&c, &c, SsimConstants::PRINTED).unwrap().item().unwrap(), 1.0);
    }

    #[test]
    fn ssim_constant_zero_vs_one() {
        let v = ssim(&t(vec![0.0; 9]), &t(vec![1.0; 9]), SsimConstants::PRINTED)
            .unwrap()
            .item()
            .unwrap();
        assert!((v - 0.01 / 1.01).abs() < 1e-15);
    }

    #[test]
    fn ssim_of_inverted_image() {
        let xs = vec![0.1, 0.7, 0.3, 0.9, 0.5];
        let x = t(xs.clone());
        let y = t(xs.iter().map(|v| 1.0 - v).collect());
        // independent scalar evaluation of the formula
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = 1.0 - mx;
        let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
        let cov = -vx;
        let expected = (2.0 * mx * my + 0.01) / (mx * mx + my * my + 0.01) * (2.0 * cov + 0.03) / (2.0 * vx + 0.03);
        let got = ssim(&x, &y, SsimConstants::PRINTED).unwrap().item().unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!(got < 0.0);
    }

    #[test]
    fn combined_is_sum_of_parts() {
        let x = t(vec![0.0, 1.0]);
        let y = t(vec![1.0, 3.0]);
        let (_, b) = combined_loss(&x, &y, SsimConstants::PRINTED).unwrap();
        assert!((b.total - (b.mse + 1.0 - b.ssim)).abs() < 1e-12);
        let (_, same) = combined_loss(&x, &x, SsimConstants::PRINTED).unwrap();
        assert_eq!(same.total, 0.0);
    }

    #[test]
    fn literature_constants() {
        let c = SsimConstants::literature(1.0);
        assert!((c.c1 - 1e-4).abs() < 1e-18);
        assert!((c.c2 - 9e-4).abs() < 1e-18);
    }
}
