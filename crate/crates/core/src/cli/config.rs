//! Resolved run configuration: built-in defaults, then the TOML file, then
//! command-line flags.

use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::baselines::FilterParams;
use crate::error::{Error, Result};
use crate::falseflow::FalseFlowConfig;
use crate::metrics::FAZ_DIAMETER_MM;
use crate::model::ModelSpec;
use crate::synth::{CorpusSpec, Degradation, VesselTreeSpec};
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 128-channel stem, 4 blocks x 20 layers x 64 channels
    Paper,
    /// 16-channel stem, 2 blocks x 3 layers x 8 channels
    Desk,
}

impl Preset {
    pub fn spec(self) -> ModelSpec {
        match self {
            Preset::Paper => ModelSpec::paper(),
            Preset::Desk => ModelSpec::desk(),
        }
    }
}

/// Architecture: a preset plus optional per-field overrides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: Preset,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub low_level_channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers_per_block: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_channels: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            preset: Preset::Paper,
            low_level_channels: None,
            block_count: None,
            layers_per_block: None,
            block_channels: None,
        }
    }
}

impl ModelConfig {
    pub fn spec(&self) -> ModelSpec {
        let base = self.preset.spec();
        ModelSpec::new(
            self.low_level_channels.unwrap_or(base.low_level_channels),
            self.block_count.unwrap_or(base.block_count),
            self.layers_per_block.unwrap_or(base.layers_per_block),
            self.block_channels.unwrap_or(base.block_channels),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub fov_mm: f64,
    pub size_px: usize,
    pub tree: VesselTreeSpec,
    pub degradation: Degradation,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let c = CorpusSpec::default();
        SynthConfig {
            n: c.n,
            fov_mm: c.fov_mm,
            size_px: c.size_px,
            tree: c.tree,
            degradation: c.degradation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// (row, col) of the noise circle; the image center when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub faz_center: Option<(f64, f64)>,
    pub faz_diameter_mm: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            faz_center: None,
            faz_diameter_mm: FAZ_DIAMETER_MM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed: corpus planning, weight init, shuffling and noise.
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub metrics: MetricsConfig,
    pub filters: FilterParams,
    pub falseflow: FalseFlowConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            metrics: MetricsConfig::default(),
            filters: FilterParams::default(),
            falseflow: FalseFlowConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::format(origin, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Pushes the master seed into every stage that draws random numbers.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self.falseflow.seed = seed;
        self
    }

    pub fn corpus_spec(&self) -> CorpusSpec {
        CorpusSpec {
            n: self.synth.n,
            master_seed: self.seed,
            fov_mm: self.synth.fov_mm,
            size_px: self.synth.size_px,
            tree: self.synth.tree,
            degradation: self.synth.degradation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml(&c.to_toml(), Path::new("x")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let text = "seed = 5\n[model]\npreset = \"desk\"\nblock_count = 3\n[train.schedule]\npatience_epochs = 4\n";
        let c = RunConfig::from_toml(text, Path::new("x")).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.model.spec(), ModelSpec::new(16, 3, 3, 8));
        assert_eq!(c.train.schedule.patience_epochs, 4);
        assert_eq!(c.train.schedule.factor, 0.1);
        assert_eq!(c.train.batch_size, 128);
        assert_eq!(c.filters.median_window, 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[train]\nlearning_rate = 1\n", Path::new("x")).is_err());
    }
}
