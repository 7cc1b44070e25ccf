//! Reconstruction of high-resolution angiograms from undersampled scans.
//!
//! The crate bundles the whole pipeline: image handling ([`image`]), pair
//! preparation ([`preprocess`]), a small reverse-mode autodiff engine
//! ([`tensor`]), the residual reconstruction network ([`model`]) and its
//! training losses ([`losses`]), image-quality metrics ([`metrics`]),
//! classical baseline filters ([`baselines`]), a synthetic paired-data
//! generator ([`synth`]) and the command-line front end ([`cli`]).

pub mod baselines;
pub mod cli;
pub mod compare;
pub mod error;
pub mod falseflow;
mod fsutil;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Flagged, Result, Warning};
pub use image::{Angiogram, IntensityScale, PixelRegion};
pub use model::{Model, ModelSpec};
pub use tensor::Tensor;
