//! Patch-based training loop: Adam on `MSE + (1 - SSIM)` with plateau
//! decay and early stopping.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{bilateral, BilateralParams};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::image::{normalize_unit, Angiogram};
use crate::losses::{combined_loss, SsimConstants};
use crate::model::{Model, TrainingMeta};
use crate::preprocess::{augment_patch, extract_patches, prepare_pair, PatchSet};
use crate::tensor::{Adam, AdamConfig, PlateauConfig, PlateauSchedule, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    /// Hard cap on epochs; the schedule usually stops earlier.
    pub max_epochs: u32,
    /// Batches per epoch; 0 means one full pass over the patches.
    pub steps_per_epoch: usize,
    pub patch_size: usize,
    pub stride: usize,
    pub augment: bool,
    /// Smooth targets with the bilateral filter before patching.
    pub bilateral_target: bool,
    pub schedule: PlateauConfig,
    pub ssim: SsimConstants,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            batch_size: 128,
            max_epochs: 100,
            steps_per_epoch: 0,
            patch_size: 38,
            stride: 19,
            augment: true,
            bilateral_target: true,
            schedule: PlateauConfig::default(),
            ssim: SsimConstants::PRINTED,
            seed: 0,
        }
    }
}

/// One line of the loss log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    /// Rate used during the epoch.
    pub lr: f64,
    pub loss: f64,
    pub mse: f64,
    pub ssim: f64,
    pub best_loss: f64,
    /// Lowest single-batch loss seen during the epoch.
    pub min_batch_loss: f64,
    pub steps: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
    pub meta: TrainingMeta,
}

/// Builds training patches from (degraded, clean) pairs: align, smooth the
/// target if requested, normalize each image to [0, 1], tile, augment.
pub fn build_patches(pairs: &[(Angiogram, Angiogram)], aligned: bool, cfg: &TrainConfig) -> Result<PatchSet> {
    let mut set = PatchSet {
        size: cfg.patch_size,
        stride: cfg.stride,
        source_id: String::from("corpus"),
        patches: Vec::new(),
    };
    for (degraded, clean) in pairs {
        let prepared = prepare_pair(degraded, clean, aligned)?;
        let target = if cfg.bilateral_target {
            bilateral(&prepared.target.to_raw255(), &BilateralParams::default())?.to_unit()
        } else {
            prepared.target
        };
        let input = normalize_unit(&prepared.input).logged();
        let target = normalize_unit(&target).logged();
        let tiles = extract_patches(&input, &target, cfg.patch_size, cfg.stride)?;
        if cfg.augment {
            for (a, b) in tiles.patches {
                set.patches.extend(augment_patch(&a, &b, cfg.patch_size));
            }
        } else {
            set.patches.extend(tiles.patches);
        }
    }
    Ok(set)
}

/// Settings for fitting a single patch: one-patch batches, epochs of 100
/// steps, at most 2000 steps in total.
pub fn overfit_config(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 1,
        max_epochs: 20,
        steps_per_epoch: 100,
        augment: false,
        bilateral_target: false,
        seed,
        ..TrainConfig::default()
    }
}

/// The centered `size` x `size` patch of a normalized (input, target) pair.
pub fn center_patch(input: &Angiogram, target: &Angiogram, size: usize) -> Result<PatchSet> {
    let prepared = prepare_pair(input, target, true)?;
    let (h, w) = (prepared.input.height(), prepared.input.width());
    if h < size || w < size {
        return Err(Error::invalid(format!("image {w}x{h} is smaller than the {size}px patch")));
    }
    let (top, left) = ((h - size) / 2, (w - size) / 2);
    let cut = |img: &Angiogram| -> Result<Vec<f32>> {
        Ok(normalize_unit(img).logged().crop(top, left, size, size)?.into_pixels())
    };
    Ok(PatchSet {
        size,
        stride: size,
        source_id: input.id().to_string(),
        patches: vec![(cut(&prepared.input)?, cut(&prepared.target)?)],
    })
}

fn batch_tensors(set: &PatchSet, idx: &[usize]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let per = set.size * set.size;
    let mut x = Vec::with_capacity(idx.len() * per);
    let mut y = Vec::with_capacity(idx.len() * per);
    for &i in idx {
        x.extend_from_slice(&set.patches[i].0);
        y.extend_from_slice(&set.patches[i].1);
    }
    let shape = [idx.len(), 1, set.size, set.size];
    Ok((Tensor::from_vec(&shape, x)?, Tensor::from_vec(&shape, y)?))
}

/// Trains `model` in place. `on_epoch` sees every record as it is produced.
pub fn train(
    model: &Model,
    set: &PatchSet,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    if set.is_empty() {
        return Err(Error::invalid("no training patches"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut adam = Adam::new(
        model.parameters(),
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    )?;
    let mut schedule = PlateauSchedule::new(cfg.lr, cfg.schedule);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut cursor = order.len();
    let full_pass = set.len().div_ceil(cfg.batch_size);
    let steps = if cfg.steps_per_epoch == 0 {
        full_pass
    } else {
        cfg.steps_per_epoch
    };

    let mut log = Vec::new();
    let mut stopped_early = false;
    for epoch in 1..=cfg.max_epochs {
        let lr = schedule.lr();
        adam.set_lr(lr);
        let (mut total, mut mse, mut ssim) = (0.0, 0.0, 0.0);
        let mut min_batch = f64::INFINITY;
        for _ in 0..steps {
            if cursor >= order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let end = (cursor + cfg.batch_size).min(order.len());
            let (x, y) = batch_tensors(set, &order[cursor..end])?;
            cursor = end;
            let out = model.forward(&x)?;
            let (loss, parts) = combined_loss(&out, &y, cfg.ssim)?;
            if !parts.total.is_finite() {
                return Err(Error::Numerical(format!(
                    "loss became {} at epoch {epoch}, step {}",
                    parts.total,
                    adam.steps() + 1
                )));
            }
            adam.zero_grad();
            loss.backward()?;
            adam.step();
            total += parts.total;
            min_batch = min_batch.min(parts.total);
            mse += parts.mse;
            ssim += parts.ssim;
        }
        let n = steps as f64;
        let epoch_loss = total / n;
        let decision = schedule.epoch_end(epoch_loss);
        let record = EpochRecord {
            epoch,
            lr,
            loss: epoch_loss,
            mse: mse / n,
            ssim: ssim / n,
            best_loss: schedule.best_loss(),
            min_batch_loss: min_batch,
            steps: adam.steps(),
        };
        on_epoch(&record);
        log.push(record);
        if decision.stop {
            stopped_early = true;
            break;
        }
    }
    let meta = TrainingMeta {
        epochs: log.len() as u32,
        final_loss: log.last().map_or(f64::NAN, |r| r.loss),
        seed: cfg.seed,
    };
    Ok(TrainOutcome {
        log,
        stopped_early,
        meta,
    })
}

pub const LOSS_LOG_HEADER: [&str; 8] = ["epoch", "lr", "loss", "mse", "ssim", "best_loss", "min_batch_loss", "steps"];

pub fn write_loss_log(log: &[EpochRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(LOSS_LOG_HEADER).map_err(fail)?;
    for r in log {
        w.write_record([
            r.epoch.to_string(),
            r.lr.to_string(),
            r.loss.to_string(),
            r.mse.to_string(),
            r.ssim.to_string(),
            r.best_loss.to_string(),
            r.min_batch_loss.to_string(),
            r.steps.to_string(),
        ])
        .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    write_atomic(path, &bytes)
}
