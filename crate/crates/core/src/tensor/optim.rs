use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam with per-parameter moment buffers.
#[derive(Debug)]
pub struct Adam<T: Scalar = f32> {
    config: AdamConfig,
    params: Vec<Tensor<T>>,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: Vec<Tensor<T>>, config: AdamConfig) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", config.lr)));
        }
        let m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        let v = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        Ok(Adam {
            config,
            params,
            m,
            v,
            t: 0,
        })
    }

    pub fn lr(&self) -> f64 {
        self.config.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    /// One update from the gradients currently stored on the parameters.
    /// A parameter without a gradient is treated as having a zero gradient.
    pub fn step(&mut self) {
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.t as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for ((p, m), v) in self.params.iter().zip(&mut self.m).zip(&mut self.v) {
            let grad = p.grad();
            p.update_data(|data| {
                for i in 0..data.len() {
                    let g = grad.as_ref().map_or(0.0, |g| g[i].as_f64());
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    let update = lr * m_hat / (v_hat.sqrt() + epsilon);
                    data[i] = T::from_f64_lossy(data[i].as_f64() - update);
                }
            });
        }
    }

    pub fn zero_grad(&self) {
        for p in &self.params {
            p.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(v: f64) -> Tensor<f64> {
        Tensor::parameter(&[1], vec![v]).unwrap()
    }

    fn set_grad(p: &Tensor<f64>, g: f64) {
        p.zero_grad();
        p.accumulate_grad(&[g]);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let p = param(0.7);
        let mut adam = Adam::new(vec![p.clone()], AdamConfig::default()).unwrap();
        set_grad(&p, 0.0);
        adam.step();
        adam.step();
        assert_eq!(p.to_vec(), vec![0.7]);
        assert_eq!(adam.steps(), 2);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
        for g in [3.0, -0.02] {
            let p = param(1.0);
            let mut adam = Adam::new(vec![p.clone()], AdamConfig::default()).unwrap();
            set_grad(&p, g);
            adam.step();
            let expected = 1.0 - 0.01 * g / (f64::abs(g) + 1e-8);
            assert!((p.to_vec()[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn descends_a_quadratic() {
        let p = param(1.0);
        let mut adam = Adam::new(vec![p.clone()], AdamConfig::default()).unwrap();
        for _ in 0..500 {
            let w = p.to_vec()[0];
            set_grad(&p, 2.0 * w);
            adam.step();
        }
        assert!(p.to_vec()[0].abs() < 1e-2, "w = {}", p.to_vec()[0]);
    }

    #[test]
    fn rejects_non_positive_lr() {
        let cfg = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        assert!(Adam::new(vec![param(1.0)], cfg).is_err());
    }
}
