//! The reconstruction network.
//!
//! ```text
//! input (1 ch) ─ conv(low) ─ ReLU ─┬─ block 1 ─ concat ─ ... ─ block B ─ concat ─ conv(1 ch) ─ (+) ─ output
//!                                  └────────────────┘              └────────────┘              │
//! input ───────────────────────────────────────────────────────────────────────────────────────┘
//! ```
//!
//! Each block is a plain chain of `layers_per_block` conv+ReLU layers. The
//! block output is concatenated with the block input (output channels
//! first) and the result feeds the next block, so block `k` sees
//! `low + k * block_channels` channels. The last layer predicts a residual
//! that is added to the input image; it has a bias but no activation.

mod checkpoint;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, TrainingMeta};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Angiogram, IntensityScale};
use crate::tensor::{self, Tensor};

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub low_level_channels: usize,
    pub block_count: usize,
    pub layers_per_block: usize,
    pub block_channels: usize,
    pub kernel: usize,
}

impl ModelSpec {
    pub const KERNEL: usize = 3;

    /// 128-channel stem, four blocks of twenty 64-channel layers.
    pub fn paper() -> Self {
        ModelSpec {
            low_level_channels: 128,
            block_count: 4,
            layers_per_block: 20,
            block_channels: 64,
            kernel: Self::KERNEL,
        }
    }

    /// Two blocks of three 8-channel layers after a 16-channel stem.
    pub fn desk() -> Self {
        ModelSpec {
            low_level_channels: 16,
            block_count: 2,
            layers_per_block: 3,
            block_channels: 8,
            kernel: Self::KERNEL,
        }
    }

    pub fn new(low_level_channels: usize, block_count: usize, layers_per_block: usize, block_channels: usize) -> Self {
        ModelSpec {
            low_level_channels,
            block_count,
            layers_per_block,
            block_channels,
            kernel: Self::KERNEL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.low_level_channels == 0 || self.block_count == 0 || self.layers_per_block == 0 || self.block_channels == 0 {
            return Err(Error::invalid(format!("model spec counts must all be >= 1: {self:?}")));
        }
        if self.kernel != Self::KERNEL {
            return Err(Error::invalid(format!("kernel must be {}, got {}", Self::KERNEL, self.kernel)));
        }
        Ok(())
    }

    /// Input channel width of every block.
    pub fn block_input_widths(&self) -> Vec<usize> {
        (0..self.block_count)
            .map(|k| self.low_level_channels + k * self.block_channels)
            .collect()
    }

    pub fn residual_input_width(&self) -> usize {
        self.low_level_channels + self.block_count * self.block_channels
    }

    /// (name, out_ch, in_ch) of every conv layer in forward order.
    pub fn layer_plan(&self) -> Vec<(String, usize, usize)> {
        let mut plan = vec![("low".to_string(), self.low_level_channels, 1)];
        for (b, &width) in self.block_input_widths().iter().enumerate() {
            for l in 0..self.layers_per_block {
                let in_ch = if l == 0 { width } else { self.block_channels };
                plan.push((format!("block{}.conv{}", b + 1, l + 1), self.block_channels, in_ch));
            }
        }
        plan.push(("residual".to_string(), 1, self.residual_input_width()));
        plan
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_plan()
            .iter()
            .map(|(_, o, i)| o * i * self.kernel * self.kernel + o)
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct ConvLayer {
    pub name: String,
    pub weight: Tensor<f32>,
    pub bias: Tensor<f32>,
}

impl ConvLayer {
    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }
}

/// Forward-pass shapes observed while running the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeTrace {
    pub block_inputs: Vec<Vec<usize>>,
    pub residual_input: Vec<usize>,
    pub output: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    layers: Vec<ConvLayer>,
}

impl Model {
    /// Kaiming-normal weights (std = sqrt(2 / fan_in)) and zero biases for
    /// every ReLU layer; the residual layer starts at zero, so an untrained
    /// network is the identity map.
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k2 = spec.kernel * spec.kernel;
        let layers = spec
            .layer_plan()
            .into_iter()
            .map(|(name, out_ch, in_ch)| {
                let std = (2.0 / (in_ch * k2) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                let w: Vec<f32> = (0..out_ch * in_ch * k2).map(|_| normal.sample(&mut rng) as f32).collect();
                Ok(ConvLayer {
                    name,
                    weight: Tensor::parameter(&[out_ch, in_ch, spec.kernel, spec.kernel], w)?,
                    bias: Tensor::parameter(&[out_ch], vec![0.0; out_ch])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = Model { spec, layers };
        model.check_widths()?;
        model.zero_residual()?;
        Ok(model)
    }

    /// Every weight and bias zero.
    pub fn zeroed(spec: ModelSpec) -> Result<Self> {
        let model = Self::build(spec, 0)?;
        for layer in &model.layers {
            layer.weight.set_data(&vec![0.0; layer.weight.numel()])?;
            layer.bias.set_data(&vec![0.0; layer.bias.numel()])?;
        }
        Ok(model)
    }

    pub(crate) fn from_layers(spec: ModelSpec, layers: Vec<ConvLayer>) -> Result<Self> {
        spec.validate()?;
        let model = Model { spec, layers };
        model.check_widths()?;
        Ok(model)
    }

    fn check_widths(&self) -> Result<()> {
        let plan = self.spec.layer_plan();
        if plan.len() != self.layers.len() {
            return Err(Error::invalid(format!(
                "spec implies {} layers, model has {}",
                plan.len(),
                self.layers.len()
            )));
        }
        for ((name, out_ch, in_ch), layer) in plan.iter().zip(&self.layers) {
            let expected = [*out_ch, *in_ch, self.spec.kernel, self.spec.kernel];
            if layer.name != *name || layer.weight.shape() != expected || layer.bias.shape() != [*out_ch] {
                return Err(Error::ShapeMismatch {
                    op: "model layer",
                    left: expected.to_vec(),
                    right: layer.weight.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn residual_layer(&self) -> &ConvLayer {
        self.layers.last().expect("model has layers")
    }

    /// Zeroes the residual layer so the network output equals its input.
    pub fn zero_residual(&self) -> Result<()> {
        let r = self.residual_layer();
        r.weight.set_data(&vec![0.0; r.weight.numel()])?;
        r.bias.set_data(&vec![0.0; r.bias.numel()])
    }

    /// All trainable tensors, weight then bias for each layer.
    pub fn parameters(&self) -> Vec<Tensor<f32>> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.clone(), l.bias.clone()])
            .collect()
    }

    /// Network output for an (N, 1, H, W) batch, before clamping.
    pub fn forward(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.forward_traced(x).map(|(y, _)| y)
    }

    pub fn forward_traced(&self, x: &Tensor<f32>) -> Result<(Tensor<f32>, ShapeTrace)> {
        let s = x.shape();
        if s.len() != 4 || s[1] != 1 {
            return Err(Error::invalid(format!("network input must be (N, 1, H, W), got {s:?}")));
        }
        let mut layers = self.layers.iter();
        let mut conv_relu = |h: &Tensor<f32>| -> Result<Tensor<f32>> {
            let l = layers.next().expect("layer plan matches");
            tensor::relu(&tensor::conv2d(h, &l.weight, &l.bias)?)
        };
        let mut h = conv_relu(x)?;
        let mut block_inputs = Vec::with_capacity(self.spec.block_count);
        for _ in 0..self.spec.block_count {
            let block_in = h.clone();
            block_inputs.push(block_in.shape().to_vec());
            for _ in 0..self.spec.layers_per_block {
                h = conv_relu(&h)?;
            }
            h = tensor::concat_channels(&h, &block_in)?;
        }
        let residual_input = h.shape().to_vec();
        let r = self.residual_layer();
        let residual = tensor::conv2d(&h, &r.weight, &r.bias)?;
        let out = tensor::add(&residual, x)?;
        let trace = ShapeTrace {
            block_inputs,
            residual_input,
            output: out.shape().to_vec(),
        };
        Ok((out, trace))
    }

    /// Whole-image inference on a Unit-scale angiogram; the output is
    /// clamped to [0, 1].
    pub fn reconstruct(&self, img: &Angiogram) -> Result<Angiogram> {
        self.reconstruct_unclamped(img).and_then(|v| img.map_pixels(v))
    }

    /// Network output before clamping, row-major.
    pub fn reconstruct_unclamped(&self, img: &Angiogram) -> Result<Vec<f32>> {
        if img.scale() != IntensityScale::Unit {
            return Err(Error::invalid("reconstruct expects a Unit-scale image"));
        }
        if img.width() < 3 || img.height() < 3 {
            return Err(Error::invalid(format!(
                "image {}x{} is smaller than the 3x3 kernel",
                img.width(),
                img.height()
            )));
        }
        let x = Tensor::from_vec(&[1, 1, img.height(), img.width()], img.pixels().to_vec())?;
        let y = tensor::no_grad(|| self.forward(&x))?;
        Ok(y.to_vec())
    }
}
