//! Plateau learning-rate decay with early stopping.
//!
//! Two independent rules are evaluated at every epoch end:
//! - decay: after `patience_epochs` consecutive epochs without a strict
//!   improvement on the best loss, multiply the rate by `factor`, never
//!   going below `min_lr`;
//! - stop: once the last `stop_patience` epoch losses lie within
//!   `stop_delta` of each other, stop (and stay stopped).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience_epochs: u32,
    pub min_lr: f64,
    pub stop_delta: f64,
    pub stop_patience: u32,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            factor: 0.1,
            patience_epochs: 2,
            min_lr: 1e-6,
            stop_delta: 1e-5,
            stop_patience: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochDecision {
    pub lr: f64,
    pub stop: bool,
    pub improved: bool,
    pub decayed: bool,
}

#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    config: PlateauConfig,
    lr: f64,
    best_loss: f64,
    epochs_since_improvement: u32,
    recent: Vec<f64>,
    stopped: bool,
}

impl PlateauSchedule {
    pub fn new(initial_lr: f64, config: PlateauConfig) -> Self {
        PlateauSchedule {
            config,
            lr: initial_lr.max(config.min_lr),
            best_loss: f64::INFINITY,
            epochs_since_improvement: 0,
            recent: Vec::new(),
            stopped: false,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn epochs_since_improvement(&self) -> u32 {
        self.epochs_since_improvement
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    pub fn config(&self) -> &PlateauConfig {
        &self.config
    }

    pub fn epoch_end(&mut self, epoch_loss: f64) -> EpochDecision {
        let improved = epoch_loss < self.best_loss;
        let mut decayed = false;
        if improved {
            self.best_loss = epoch_loss;
            self.epochs_since_improvement = 0;
        } else {
            self.epochs_since_improvement += 1;
            if self.epochs_since_improvement >= self.config.patience_epochs {
                self.epochs_since_improvement = 0;
                if self.lr > self.config.min_lr {
                    self.lr = (self.lr * self.config.factor).max(self.config.min_lr);
                    decayed = true;
                }
            }
        }

        let window = self.config.stop_patience.max(1) as usize;
        self.recent.push(epoch_loss);
        if self.recent.len() > window {
            self.recent.remove(0);
        }
        if self.recent.len() == window {
            let (lo, hi) = self
                .recent
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if hi - lo <= self.config.stop_delta {
                self.stopped = true;
            }
        }

        EpochDecision {
            lr: self.lr,
            stop: self.stopped,
            improved,
            decayed,
        }
    }
}
