mod common;

use harnet::preprocess::{max_inscribed_rect, prepare_pair, register, warp_image, SimilarityTransform};
use harnet::{Angiogram, PixelRegion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scene(truth: &SimilarityTransform) -> (Angiogram, Angiogram) {
    let base = common::texture(160, 4);
    let (fixed, _) = warp_image(&base, 64, 64, &SimilarityTransform::IDENTITY).unwrap();
    let (moving, valid) = warp_image(&base, 80, 80, &truth.inverse()).unwrap();
    assert!(valid.iter().all(|&v| v));
    (moving, fixed)
}

#[test]
fn self_registration_is_identity() {
    let img = common::texture(64, 8);
    let reg = register(&img, &img).unwrap();
    let t = reg.transform;
    assert!(t.tx.abs() < 1e-3 && t.ty.abs() < 1e-3 && t.theta.abs() < 1e-3);
    assert!((t.scale - 1.0).abs() < 1e-3);
    assert_eq!(reg.objective, 0.0);
}

#[test]
fn known_shift() {
    let truth = SimilarityTransform::new(5.0, -3.0, 0.0, 1.0).unwrap();
    let (moving, fixed) = scene(&truth);
    let t = register(&moving, &fixed).unwrap().transform;
    assert!((t.tx - 5.0).abs() < 0.5 && (t.ty + 3.0).abs() < 0.5, "{t:?}");
}

#[test]
fn known_rotation_and_scale() {
    let truth = SimilarityTransform::new(0.0, 0.0, 2f64.to_radians(), 1.02).unwrap();
    let (moving, fixed) = scene(&truth);
    let t = register(&moving, &fixed).unwrap().transform;
    assert!((t.theta - truth.theta).abs() < 0.2f64.to_radians(), "{t:?}");
    assert!((t.scale - 1.02).abs() < 0.005, "{t:?}");
}

#[test]
fn objective_never_worse_than_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..4 {
        let truth = SimilarityTransform::new(
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-5f64..5.0).to_radians(),
            rng.gen_range(0.95..1.05),
        )
        .unwrap();
        let (moving, fixed) = scene(&truth);
        let reg = register(&moving, &fixed).unwrap();
        assert!(reg.objective <= reg.identity_objective);
        assert!(reg.converged);
    }
}

#[test]
fn prepare_pair_crops_to_valid_overlap() {
    let base = common::texture(96, 12);
    let (target, _) = warp_image(&base, 64, 64, &SimilarityTransform::IDENTITY).unwrap();
    let truth = SimilarityTransform::new(4.0, -2.0, 3f64.to_radians(), 1.0).unwrap();
    // same-size moving image, so the corners fall outside after alignment
    let (moving, _) = warp_image(&base, 64, 64, &truth.inverse()).unwrap();
    let prepared = prepare_pair(&moving, &target, false).unwrap();
    let crop = prepared.crop;
    assert!(crop.height < 64 && crop.width < 64);
    assert_eq!(prepared.input.width(), crop.width);
    assert_eq!(prepared.target.height(), crop.height);
    let (_, valid) = warp_image(&moving, 64, 64, &prepared.registration.unwrap().transform).unwrap();
    let best = max_inscribed_rect(&PixelRegion::from_mask(&valid, 64, 64).unwrap()).unwrap();
    assert_eq!(best, crop);
    let err: f64 = prepared
        .input
        .pixels()
        .iter()
        .zip(prepared.target.pixels())
        .map(|(a, b)| ((a - b) as f64).powi(2))
        .sum::<f64>()
        / prepared.input.pixels().len() as f64;
    assert!(err < 1e-4, "residual mse {err}");
}

#[test]
fn aligned_pairs_skip_registration() {
    let target = common::texture(64, 3);
    let small = harnet::preprocess::decimate(&target, 2).unwrap();
    let prepared = prepare_pair(&small, &target, true).unwrap();
    assert!(prepared.registration.is_none());
    assert_eq!(prepared.input.width(), 64);
    assert_eq!(prepared.input.get(10, 10), target.get(10, 10));
}
