use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use harnet::cli::{EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
use harnet::image::{load_image, save_image};
use harnet::model::{save_checkpoint, TrainingMeta};
use harnet::{Angiogram, IntensityScale, Model, ModelSpec};

fn harnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harnet")).args(args).output().unwrap()
}

fn code(out: &Output) -> u8 {
    out.status.code().unwrap() as u8
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str, n: &str) -> PathBuf {
    let out = dir.join(format!("corpus-{seed}-{n}"));
    let o = harnet(&["synth", "--n", n, "--size", "48", "--seed", seed, "--out", s(&out)]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn help_and_usage_errors() {
    let help = harnet(&["--help"]);
    assert_eq!(code(&help), EXIT_OK);
    assert!(String::from_utf8_lossy(&help.stdout).contains("[train.schedule]"));
    assert_eq!(code(&harnet(&["synth", "--bogus"])), EXIT_USAGE);
    assert_eq!(code(&harnet(&[])), EXIT_USAGE);
    assert_eq!(code(&harnet(&["evaluate", "--center", "1;2", "x.png"])), EXIT_USAGE);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nlearning_rate = 3\n").unwrap();
    let o = harnet(&["--config", s(&cfg), "synth", "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), EXIT_USAGE);
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "3", "2");
    let b = dir.path().join("again");
    assert_eq!(code(&harnet(&["synth", "--n", "2", "--size", "48", "--seed", "3", "--out", s(&b)])), EXIT_OK);
    let c = synth(dir.path(), "4", "2");
    for rel in ["manifest.toml", "clean/pair0000.png", "degraded/pair0001.png", "run_config.toml"] {
        assert_eq!(std::fs::read(a.join(rel)).unwrap(), std::fs::read(b.join(rel)).unwrap(), "{rel}");
    }
    assert_ne!(
        std::fs::read(a.join("clean/pair0000.png")).unwrap(),
        std::fs::read(c.join("clean/pair0000.png")).unwrap()
    );
}

#[test]
fn missing_parent_directory_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("no/such/dir");
    let o = harnet(&["synth", "--n", "1", "--out", s(&out)]);
    assert_eq!(code(&o), EXIT_DATA);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
}

#[test]
fn zero_weight_reconstruction_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("zero.harn");
    save_checkpoint(&Model::zeroed(ModelSpec::desk()).unwrap(), &TrainingMeta::default(), &ck).unwrap();
    let corpus = synth(dir.path(), "1", "1");
    let input = corpus.join("degraded/pair0000.png");
    let out = dir.path().join("rec");
    let o = harnet(&["reconstruct", "--checkpoint", s(&ck), "--out", s(&out), s(&input)]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let before = load_image(&input).unwrap();
    let after = load_image(&out.join("pair0000.png")).unwrap();
    assert_eq!(before, after);

    // an explicit preset that disagrees with the checkpoint is refused
    let o = harnet(&["--preset", "paper", "reconstruct", "--checkpoint", s(&ck), "--out", s(&out), s(&input)]);
    assert_eq!(code(&o), EXIT_DATA);
}

#[test]
fn evaluate_records_constant_image_failure() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.png");
    save_image(
        &Angiogram::new("flat", 32, 32, vec![40.0; 1024], IntensityScale::Raw255, 3.0).unwrap(),
        &flat,
    )
    .unwrap();
    let corpus = synth(dir.path(), "2", "1");
    let good = corpus.join("clean/pair0000.png");
    let out = dir.path().join("eval");
    let o = harnet(&["evaluate", "--out", s(&out), s(&flat), s(&good)]);
    assert_eq!(code(&o), EXIT_OK);
    assert!(String::from_utf8_lossy(&o.stdout).contains("failed=1"));
    let rows = read_csv(&out.join("metrics.csv"));
    assert_eq!(rows.len(), 2);
    // the flat image still gets noise and contrast, only connectivity fails
    assert_eq!(rows[0][5], "1600");
    assert_eq!(rows[0][6], "0");
    assert_eq!(rows[0][7], "");
    assert!(rows[0][8].contains("constant image"));
    assert_eq!(rows[1][8], "");
}

#[test]
fn compare_with_one_image_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "5", "1");
    let out = dir.path().join("cmp");
    let o = harnet(&["compare", "--corpus", s(&corpus), "--out", s(&out)]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("comparison.csv"));
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["Original", "Gabor", "Frangi"]);
    for r in &rows {
        assert_eq!(r[1], "1");
        for std_col in [3, 5, 7] {
            assert_eq!(r[std_col], "0");
        }
    }
    assert_eq!(read_csv(&out.join("comparison_images.csv")).len(), 3);
}

#[test]
fn train_then_falseflow_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "6", "2");
    let run = dir.path().join("run");
    let o = harnet(&[
        "--preset",
        "desk",
        "train",
        "--corpus",
        s(&corpus),
        "--epochs",
        "2",
        "--steps-per-epoch",
        "2",
        "--out",
        s(&run),
    ]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("train epochs=2 steps=4"));
    let log = read_csv(&run.join("loss_log.csv"));
    assert_eq!(log.len(), 2);
    let cfg = std::fs::read_to_string(run.join("run_config.toml")).unwrap();
    assert!(cfg.contains("preset = \"desk\""));

    let ck = run.join("model.harn");
    let ff = dir.path().join("ff");
    let o = harnet(&["falseflow", "--corpus", s(&corpus), "--checkpoint", s(&ck), "--images", "1", "--out", s(&ff)]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("entries=200"));
    // one baseline row plus the sweep
    assert_eq!(read_csv(&ff.join("falseflow.csv")).len(), 201);
    assert!(std::fs::read_to_string(ff.join("falseflow_summary.txt")).unwrap().contains("no_false_flow_up_to="));

    let o = harnet(&["falseflow", "--corpus", s(&corpus), "--checkpoint", s(&ck), "--images", "5", "--out", s(&ff)]);
    assert_eq!(code(&o), EXIT_DATA);
}

#[test]
fn divergent_training_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "7", "1");
    let cfg = dir.path().join("hot.toml");
    std::fs::write(&cfg, "[model]\npreset = \"desk\"\n[train]\nlr = 1e300\n").unwrap();
    let o = harnet(&[
        "--config",
        s(&cfg),
        "train",
        "--overfit",
        "--corpus",
        s(&corpus),
        "--epochs",
        "3",
        "--out",
        s(&dir.path().join("run")),
    ]);
    assert_eq!(code(&o), EXIT_NUMERICAL, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn empty_corpus_cannot_be_trained() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "8", "0");
    let manifest = harnet::synth::Manifest::load(&corpus.join("manifest.toml")).unwrap();
    assert!(manifest.pairs.is_empty());
    let o = harnet(&["train", "--corpus", s(&corpus), "--out", s(&dir.path().join("run"))]);
    assert_eq!(code(&o), EXIT_DATA);
}
