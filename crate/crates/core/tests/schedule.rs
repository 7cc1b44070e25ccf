use harnet::preprocess::PatchSet;
use harnet::tensor::{PlateauConfig, PlateauSchedule};
use harnet::train::{train, TrainConfig};
use harnet::{Model, ModelSpec};
use proptest::prelude::*;

/// Identical input and target through an all-zero network: the loss is
/// exactly zero at every step and every gradient vanishes.
fn constant_loss_run(max_epochs: u32) -> harnet::train::TrainOutcome {
    let patch: Vec<f32> = (0..16 * 16).map(|i| (i % 7) as f32 / 7.0).collect();
    let set = PatchSet {
        size: 16,
        stride: 16,
        source_id: "stub".into(),
        patches: vec![(patch.clone(), patch)],
    };
    let model = Model::zeroed(ModelSpec::desk()).unwrap();
    let cfg = TrainConfig {
        batch_size: 1,
        steps_per_epoch: 3,
        max_epochs,
        augment: false,
        bilateral_target: false,
        ..TrainConfig::default()
    };
    train(&model, &set, &cfg, |_| {}).unwrap()
}

#[test]
fn constant_loss_training_stops_at_epoch_three() {
    let out = constant_loss_run(50);
    assert!(out.stopped_early);
    assert_eq!(out.log.len(), 3);
    assert!(out.log.iter().all(|r| r.loss == 0.0 && r.lr == 0.01));
    assert_eq!(out.log.last().unwrap().steps, 9);
}

#[test]
fn constant_loss_decision_trace() {
    let mut s = PlateauSchedule::new(0.01, PlateauConfig::default());
    let trace: Vec<(f64, bool)> = (0..3).map(|_| s.epoch_end(0.25)).map(|d| (d.lr, d.stop)).collect();
    assert_eq!(trace[0], (0.01, false));
    assert_eq!(trace[1], (0.01, false));
    assert!((trace[2].0 - 0.001).abs() < 1e-15 && trace[2].1);
}

#[test]
fn stalled_but_moving_loss_decays_to_the_floor() {
    // never beats the first epoch, never flat enough to stop
    let mut s = PlateauSchedule::new(0.01, PlateauConfig::default());
    let mut rates = Vec::new();
    for e in 0..14 {
        let loss = if e == 0 { 1.0 } else { 2.0 + (e % 2) as f64 };
        let d = s.epoch_end(loss);
        assert!(!d.stop);
        rates.push(d.lr);
    }
    let expected = [0.01, 0.01, 1e-3, 1e-3, 1e-4, 1e-4, 1e-5, 1e-5, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6];
    for (got, want) in rates.iter().zip(expected) {
        assert!((got - want).abs() <= want * 1e-9, "{rates:?}");
    }
}

proptest! {
    #[test]
    fn rate_never_rises_or_leaves_its_range(losses in proptest::collection::vec(0.0f64..2.0, 1..40)) {
        let mut s = PlateauSchedule::new(0.01, PlateauConfig::default());
        let mut prev = 0.01;
        let mut stopped = false;
        for l in losses {
            let d = s.epoch_end(l);
            prop_assert!(d.lr <= prev && d.lr >= 1e-6);
            prop_assert!(!stopped || d.stop);
            prev = d.lr;
            stopped = d.stop;
        }
    }

    #[test]
    fn best_loss_is_running_minimum(losses in proptest::collection::vec(0.0f64..2.0, 1..40)) {
        let mut s = PlateauSchedule::new(0.01, PlateauConfig::default());
        let mut min = f64::INFINITY;
        for l in losses {
            s.epoch_end(l);
            min = min.min(l);
            prop_assert_eq!(s.best_loss(), min);
        }
    }
}
