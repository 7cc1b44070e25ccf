//! One function per subcommand. Each writes its resolved configuration
//! next to its outputs and returns what it produced.

use std::path::{Path, PathBuf};

use log::{info, warn};

use super::config::RunConfig;
use crate::compare::{compare_methods, Comparison};
use crate::error::{Error, Result};
use crate::falseflow::{false_flow_experiment, FalseFlowReport};
use crate::fsutil::write_atomic;
use crate::image::{load_image, save_image, Angiogram, IntensityScale};
use crate::metrics::{connectivity, noise_intensity, rms_contrast, RegionSpec};
use crate::model::{load_checkpoint, save_checkpoint, Model};
use crate::synth::{make_corpus, Manifest, MANIFEST_NAME};
use crate::train::{build_patches, center_patch, overfit_config, train, write_loss_log, TrainOutcome};

pub const RESOLVED_CONFIG: &str = "run_config.toml";
pub const CHECKPOINT_NAME: &str = "model.harn";
pub const LOSS_LOG_NAME: &str = "loss_log.csv";
pub const METRICS_NAME: &str = "metrics.csv";
pub const COMPARISON_NAME: &str = "comparison.csv";
pub const COMPARISON_IMAGES_NAME: &str = "comparison_images.csv";
pub const FALSEFLOW_NAME: &str = "falseflow.csv";
pub const FALSEFLOW_SUMMARY_NAME: &str = "falseflow_summary.txt";

pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let fail = |e: csv::Error| Error::format(path, e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref())).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Creates `out` if needed (its parent must exist) and stores the config.
fn prepare_out(cfg: &RunConfig, out: &Path) -> Result<()> {
    if !out.is_dir() {
        std::fs::create_dir(out).map_err(|e| Error::io(out, e))?;
    }
    write_atomic(&out.join(RESOLVED_CONFIG), cfg.to_toml().as_bytes())
}

fn load_manifest(corpus: &Path) -> Result<Manifest> {
    Manifest::load(&corpus.join(MANIFEST_NAME))
}

pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let manifest = make_corpus(&cfg.corpus_spec(), out)?;
    write_atomic(&out.join(RESOLVED_CONFIG), cfg.to_toml().as_bytes())?;
    info!("wrote {} pairs to {}", manifest.pairs.len(), out.display());
    Ok(manifest)
}

#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    pub corpus: PathBuf,
    /// Fit the centered patch of the first pair only.
    pub overfit: bool,
}

pub fn cmd_train(cfg: &RunConfig, args: &TrainArgs, out: &Path) -> Result<(Model, TrainOutcome)> {
    let manifest = load_manifest(&args.corpus)?;
    if manifest.pairs.is_empty() {
        return Err(Error::invalid(format!("corpus {} has no pairs", args.corpus.display())));
    }
    prepare_out(cfg, out)?;
    let spec = cfg.model.spec();
    let model = Model::build(spec, cfg.train.seed)?;
    let (set, tcfg) = if args.overfit {
        let (clean, degraded) = manifest.load_pair(&args.corpus, &manifest.pairs[0])?;
        let tcfg = crate::train::TrainConfig {
            lr: cfg.train.lr,
            schedule: cfg.train.schedule,
            ssim: cfg.train.ssim,
            patch_size: cfg.train.patch_size,
            ..overfit_config(cfg.train.seed)
        };
        (center_patch(&degraded.to_unit(), &clean.to_unit(), tcfg.patch_size)?, tcfg)
    } else {
        let mut pairs = Vec::with_capacity(manifest.pairs.len());
        for entry in &manifest.pairs {
            let (clean, degraded) = manifest.load_pair(&args.corpus, entry)?;
            pairs.push((degraded.to_unit(), clean.to_unit()));
        }
        (build_patches(&pairs, manifest.aligned, &cfg.train)?, cfg.train)
    };
    info!("training {} patches of {}px, spec {:?}", set.len(), set.size, spec);
    let outcome = train(&model, &set, &tcfg, |r| {
        info!("epoch {} lr {:e} loss {:.6} (mse {:.6}, ssim {:.6})", r.epoch, r.lr, r.loss, r.mse, r.ssim)
    })?;
    write_loss_log(&outcome.log, &out.join(LOSS_LOG_NAME))?;
    save_checkpoint(&model, &outcome.meta, &out.join(CHECKPOINT_NAME))?;
    Ok((model, outcome))
}

/// Loads a checkpoint; `expected` rejects a checkpoint of another shape.
pub fn load_model(path: &Path, expected: Option<crate::model::ModelSpec>) -> Result<Model> {
    let ck = load_checkpoint(path)?;
    if let Some(spec) = expected {
        if *ck.model.spec() != spec {
            return Err(Error::invalid(format!(
                "checkpoint {} holds spec {:?}, configuration asks for {:?}",
                path.display(),
                ck.model.spec(),
                spec
            )));
        }
    }
    Ok(ck.model)
}

/// Reconstructs each input and writes it under `out` with the same file
/// name, intensity scale and metadata.
pub fn cmd_reconstruct(cfg: &RunConfig, model: &Model, inputs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return Err(Error::invalid("no input images"));
    }
    prepare_out(cfg, out)?;
    let mut written = Vec::with_capacity(inputs.len());
    for path in inputs {
        let img = load_image(path)?;
        let rebuilt = model.reconstruct(&img.to_unit())?;
        let rebuilt = match img.scale() {
            IntensityScale::Raw255 => rebuilt.to_raw255(),
            IntensityScale::Unit => rebuilt,
        };
        let name = path
            .file_name()
            .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
        let target = out.join(name);
        save_image(&rebuilt, &target)?;
        written.push(target);
    }
    Ok(written)
}

/// Metrics of one image, or why they could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub source: PathBuf,
    pub image_id: String,
    pub region: Option<RegionSpec>,
    pub noise_intensity: Option<f64>,
    pub contrast_rms: Option<f64>,
    pub connectivity: Option<f64>,
    pub error: Option<String>,
}

impl EvaluationRecord {
    pub const CSV_HEADER: [&'static str; 9] = [
        "source",
        "image_id",
        "region_row",
        "region_col",
        "region_diameter_mm",
        "noise_intensity",
        "contrast_rms",
        "connectivity",
        "error",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        vec![
            self.source.display().to_string(),
            self.image_id.clone(),
            opt(self.region.map(|r| r.center.0)),
            opt(self.region.map(|r| r.center.1)),
            opt(self.region.map(|r| r.diameter_mm)),
            opt(self.noise_intensity),
            opt(self.contrast_rms),
            opt(self.connectivity),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// Each metric is computed independently, so one failure (an Otsu
/// threshold on a constant image, say) leaves the others in the record.
pub fn evaluate_image(img: &Angiogram, source: &Path, cfg: &RunConfig) -> EvaluationRecord {
    let raw = img.to_raw255();
    let region = RegionSpec {
        center: cfg.metrics.faz_center.unwrap_or_else(|| raw.center()),
        diameter_mm: cfg.metrics.faz_diameter_mm,
    };
    let mut errors = Vec::new();
    let mut keep = |r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };
    let noise = keep(region.region(&raw).and_then(|p| noise_intensity(&raw, &p)));
    let contrast = keep(rms_contrast(&raw));
    let conn = keep(connectivity(&raw).map(|f| f.logged()));
    EvaluationRecord {
        source: source.to_path_buf(),
        image_id: img.id().to_string(),
        region: Some(region),
        noise_intensity: noise,
        contrast_rms: contrast,
        connectivity: conn,
        error: if errors.is_empty() { None } else { Some(errors.join("; ")) },
    }
}

pub fn cmd_evaluate(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<Vec<EvaluationRecord>> {
    if inputs.is_empty() {
        return Err(Error::invalid("no input images"));
    }
    prepare_out(cfg, out)?;
    let mut records = Vec::with_capacity(inputs.len());
    for path in inputs {
        let record = match load_image(path) {
            Ok(img) => evaluate_image(&img, path, cfg),
            Err(e) => EvaluationRecord {
                source: path.clone(),
                image_id: String::new(),
                region: None,
                noise_intensity: None,
                contrast_rms: None,
                connectivity: None,
                error: Some(e.to_string()),
            },
        };
        if let Some(e) = &record.error {
            warn!("{}: {e}", path.display());
        }
        records.push(record);
    }
    let rows: Vec<Vec<String>> = records.iter().map(|r| r.csv_record()).collect();
    write_csv(&out.join(METRICS_NAME), &EvaluationRecord::CSV_HEADER, &rows)?;
    Ok(records)
}

fn corpus_images(corpus: &Path, clean: bool, limit: Option<usize>) -> Result<Vec<Angiogram>> {
    let manifest = load_manifest(corpus)?;
    let take = limit.unwrap_or(manifest.pairs.len());
    if manifest.pairs.len() < take {
        return Err(Error::invalid(format!(
            "corpus {} has {} pairs, {} requested",
            corpus.display(),
            manifest.pairs.len(),
            take
        )));
    }
    manifest.pairs[..take]
        .iter()
        .map(|e| {
            let (c, d) = manifest.load_pair(corpus, e)?;
            Ok(if clean { c } else { d })
        })
        .collect()
}

/// Original, Gabor, Frangi and (with a model) HARNet over the degraded
/// images of a corpus.
pub fn cmd_compare(cfg: &RunConfig, corpus: &Path, model: Option<&Model>, out: &Path) -> Result<Comparison> {
    let images = corpus_images(corpus, false, None)?;
    prepare_out(cfg, out)?;
    let cmp = compare_methods(&images, &cfg.filters, model, cfg.metrics.faz_diameter_mm)?;
    write_csv(&out.join(COMPARISON_NAME), &Comparison::SUMMARY_HEADER, &cmp.summary_records())?;
    write_csv(&out.join(COMPARISON_IMAGES_NAME), &Comparison::image_header(), &cmp.image_records())?;
    Ok(cmp)
}

/// Runs the false-flow sweep on the first `images` clean images of a corpus.
pub fn cmd_falseflow(cfg: &RunConfig, corpus: &Path, model: &Model, images: usize, out: &Path) -> Result<FalseFlowReport> {
    let clean = corpus_images(corpus, true, Some(images))?;
    prepare_out(cfg, out)?;
    let report = false_flow_experiment(model, &clean, &cfg.falseflow)?;
    write_csv(&out.join(FALSEFLOW_NAME), &FalseFlowReport::CSV_HEADER, &report.csv_records())?;
    write_atomic(&out.join(FALSEFLOW_SUMMARY_NAME), format!("{report}\n").as_bytes())?;
    Ok(report)
}
