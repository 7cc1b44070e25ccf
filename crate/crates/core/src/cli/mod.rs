//! Command-line front end: argument parsing, configuration resolution and
//! exit-code mapping. The `harnet` binary is a thin wrapper around [`main`].

pub mod commands;
pub mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::error::Error;
pub use commands::*;
pub use config::{ModelConfig, Preset, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "harnet", version, about = "Reconstruct high-resolution angiograms from undersampled scans")]
pub struct Cli {
    /// TOML configuration file; flags override it
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed for corpus planning, initialization, shuffling and noise [default: 0]
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,
    /// Output directory; created if missing, its parent must exist
    #[arg(long, global = true, value_name = "DIR", default_value = "harnet-out")]
    pub out: PathBuf,
    /// Architecture preset; overrides `model.preset` [default: paper]
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic (clean, degraded) corpus into --out
    Synth {
        /// Number of pairs; overrides `synth.n`
        #[arg(long)]
        n: Option<usize>,
        /// Image side in pixels; overrides `synth.size_px`
        #[arg(long)]
        size: Option<usize>,
    },
    /// Train on a corpus; writes model.harn and loss_log.csv
    Train {
        /// Corpus directory holding manifest.toml
        #[arg(long)]
        corpus: PathBuf,
        /// Fit only the centered patch of the first pair (2000 steps max)
        #[arg(long)]
        overfit: bool,
        /// Epoch cap; overrides `train.max_epochs`
        #[arg(long)]
        epochs: Option<u32>,
        /// Batches per epoch (0 = full pass); overrides `train.steps_per_epoch`
        #[arg(long)]
        steps_per_epoch: Option<usize>,
    },
    /// Run whole-image inference on each input
    Reconstruct {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Measure FAZ noise, RMS contrast and connectivity of each input
    Evaluate {
        /// FAZ circle center as ROW,COL pixels; overrides `metrics.faz_center`
        #[arg(long, value_parser = parse_center)]
        center: Option<(f64, f64)>,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Compare the original, Gabor, Frangi and (with --checkpoint) the network
    Compare {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sweep added noise over denoised clean images and measure false flow
    Falseflow {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of clean images taken from the start of the corpus
        #[arg(long, default_value_t = 10)]
        images: usize,
    },
}

fn parse_center(s: &str) -> Result<(f64, f64), String> {
    let (r, c) = s.split_once(',').ok_or("expected ROW,COL")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}"));
    Ok((num(r)?, num(c)?))
}

/// Failure of a command, with the process exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numerical(_) | Error::NonFinite(_) => EXIT_NUMERICAL,
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Defaults of every configuration key, shown at the end of `--help`.
pub fn defaults_help() -> String {
    format!(
        "Configuration defaults (TOML, pass a file with --config):\n\n{}",
        RunConfig::default().to_toml()
    )
}

/// Applies the config file and the flags on top of the defaults.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    cfg = cfg.with_seed(seed);
    if let Some(p) = cli.preset {
        cfg.model.preset = p;
    }
    match &cli.command {
        Command::Synth { n, size } => {
            if let Some(n) = n {
                cfg.synth.n = *n;
            }
            if let Some(s) = size {
                cfg.synth.size_px = *s;
            }
        }
        Command::Train {
            epochs, steps_per_epoch, ..
        } => {
            if let Some(e) = epochs {
                cfg.train.max_epochs = *e;
            }
            if let Some(s) = steps_per_epoch {
                cfg.train.steps_per_epoch = *s;
            }
        }
        Command::Evaluate { center: Some(c), .. } => cfg.metrics.faz_center = Some(*c),
        _ => {}
    }
    Ok(cfg)
}

/// Whether the architecture was chosen explicitly, so a checkpoint of a
/// different shape is an error rather than silently accepted.
fn explicit_spec(cli: &Cli, cfg: &RunConfig) -> Option<crate::model::ModelSpec> {
    (cli.preset.is_some() || cli.config.is_some()).then(|| cfg.model.spec())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    let out = &cli.out;
    match &cli.command {
        Command::Synth { .. } => {
            let m = cmd_synth(&cfg, out)?;
            println!("synth pairs={} out={}", m.pairs.len(), out.display());
        }
        Command::Train { corpus, overfit, .. } => {
            let args = TrainArgs {
                corpus: corpus.clone(),
                overfit: *overfit,
            };
            let (_, outcome) = cmd_train(&cfg, &args, out)?;
            let last = outcome.log.last().expect("at least one epoch");
            println!(
                "train epochs={} steps={} final_loss={} best_loss={} stopped_early={} checkpoint={}",
                last.epoch,
                last.steps,
                last.loss,
                last.best_loss,
                outcome.stopped_early,
                out.join(CHECKPOINT_NAME).display()
            );
        }
        Command::Reconstruct { checkpoint, inputs } => {
            let model = load_model(checkpoint, explicit_spec(cli, &cfg))?;
            let written = cmd_reconstruct(&cfg, &model, inputs, out)?;
            println!("reconstruct images={} out={}", written.len(), out.display());
        }
        Command::Evaluate { inputs, .. } => {
            let records = cmd_evaluate(&cfg, inputs, out)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            println!(
                "evaluate images={} failed={} report={}",
                records.len(),
                failed,
                out.join(METRICS_NAME).display()
            );
        }
        Command::Compare { corpus, checkpoint } => {
            let model = match checkpoint {
                Some(p) => Some(load_model(p, explicit_spec(cli, &cfg))?),
                None => None,
            };
            let cmp = cmd_compare(&cfg, corpus, model.as_ref(), out)?;
            print!("{cmp}");
        }
        Command::Falseflow {
            corpus,
            checkpoint,
            images,
        } => {
            let model = load_model(checkpoint, explicit_spec(cli, &cfg))?;
            let report = cmd_falseflow(&cfg, corpus, &model, *images, out)?;
            println!("falseflow {report}");
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and reports failures on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let command = Cli::command().after_long_help(defaults_help());
    let matches = match command.try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

pub fn main() -> ExitCode {
    main_with_args(std::env::args_os())
}
