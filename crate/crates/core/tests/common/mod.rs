#![allow(dead_code)]

use harnet::{Angiogram, IntensityScale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth random texture: a sum of Gaussian blobs at several widths.
pub fn texture(n: usize, seed: u64) -> Angiogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut px = vec![0.0f64; n * n];
    let blobs = (n * n / 60).max(4);
    for _ in 0..blobs {
        let cy = rng.gen_range(0.0..n as f64);
        let cx = rng.gen_range(0.0..n as f64);
        let s: f64 = rng.gen_range(1.5..6.0);
        let a: f64 = rng.gen_range(-1.0..1.0);
        let reach = (3.0 * s).ceil() as isize;
        for r in (cy as isize - reach).max(0)..(cy as isize + reach).min(n as isize) {
            for c in (cx as isize - reach).max(0)..(cx as isize + reach).min(n as isize) {
                let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
                px[r as usize * n + c as usize] += a * (-d2 / (2.0 * s * s)).exp();
            }
        }
    }
    let lo = px.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = px.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let data = px.iter().map(|v| ((v - lo) / span) as f32).collect();
    Angiogram::new(format!("tex{seed}"), n, n, data, IntensityScale::Unit, 6.0).unwrap()
}

/// Random boolean mask with a blobby structure so rectangles are non-trivial.
pub fn random_mask(h: usize, w: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; h * w];
    for _ in 0..rng.gen_range(1..6) {
        let top = rng.gen_range(0..h);
        let left = rng.gen_range(0..w);
        let hh = rng.gen_range(1..=h - top);
        let ww = rng.gen_range(1..=w - left);
        for r in top..top + hh {
            for c in left..left + ww {
                mask[r * w + c] = true;
            }
        }
    }
    for _ in 0..rng.gen_range(0..(h * w / 8).max(1)) {
        let i = rng.gen_range(0..h * w);
        mask[i] = !mask[i];
    }
    if !mask.iter().any(|&m| m) {
        mask[0] = true;
    }
    mask
}

/// Largest relative gap between the backward-pass gradient and central
/// differences, over every element of every input. `f` must map the
/// inputs to a one-element tensor.
pub fn grad_error(
    inputs: &[(Vec<usize>, Vec<f64>)],
    f: impl Fn(&[harnet::Tensor<f64>]) -> harnet::Tensor<f64>,
) -> f64 {
    use harnet::Tensor;
    let params: Vec<Tensor<f64>> = inputs
        .iter()
        .map(|(s, d)| Tensor::parameter(s, d.clone()).unwrap())
        .collect();
    f(&params).backward().unwrap();
    let eval = |values: &[Vec<f64>]| -> f64 {
        let ts: Vec<Tensor<f64>> = inputs
            .iter()
            .zip(values)
            .map(|((s, _), d)| Tensor::from_vec(s, d.clone()).unwrap())
            .collect();
        harnet::tensor::no_grad(|| f(&ts)).item().unwrap()
    };
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (i, p) in params.iter().enumerate() {
        let analytic = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
        for j in 0..inputs[i].1.len() {
            let mut values: Vec<Vec<f64>> = inputs.iter().map(|(_, d)| d.clone()).collect();
            values[i][j] += h;
            let up = eval(&values);
            values[i][j] -= 2.0 * h;
            let down = eval(&values);
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Values in [-1, -0.05] or [0.05, 1], away from the ReLU kink.
pub fn signed_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(0.05..1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect()
}

pub fn unit_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
}

/// The six differentiable building blocks checked by gradient tests, each
/// reduced to a scalar. Returns (name, worst relative error).
pub fn gradcheck_suite(seed: u64) -> Vec<(&'static str, f64)> {
    use harnet::losses::{combined_loss, mse, ssim, SsimConstants};
    use harnet::tensor::{concat_channels, conv2d, mul, relu, sum, Tensor};
    let s = seed * 10;
    let probe = |shape: &[usize], k: u64| Tensor::from_vec(shape, signed_values(shape.iter().product(), k)).unwrap();
    let x_shape = vec![1, 2, 8, 8];
    let x = (x_shape.clone(), signed_values(128, s));
    let w = (vec![3, 2, 3, 3], signed_values(54, s + 1));
    let b = (vec![3], signed_values(3, s + 2));
    let conv_probe = probe(&[1, 3, 8, 8], s + 3);
    let relu_probe = probe(&x_shape, s + 4);
    let cat_probe = probe(&[1, 3, 8, 8], s + 5);
    let other = (vec![1, 1, 8, 8], signed_values(64, s + 6));
    let y = (vec![2, 1, 8, 8], unit_values(128, s + 7));
    let yt = (vec![2, 1, 8, 8], unit_values(128, s + 8));
    vec![
        (
            "conv2d",
            grad_error(&[x.clone(), w, b], |t| sum(&mul(&conv2d(&t[0], &t[1], &t[2]).unwrap(), &conv_probe).unwrap()).unwrap()),
        ),
        (
            "relu",
            grad_error(&[x.clone()], |t| sum(&mul(&relu(&t[0]).unwrap(), &relu_probe).unwrap()).unwrap()),
        ),
        (
            "concat",
            grad_error(&[x, other], |t| sum(&mul(&concat_channels(&t[0], &t[1]).unwrap(), &cat_probe).unwrap()).unwrap()),
        ),
        ("mse", grad_error(&[y.clone(), yt.clone()], |t| mse(&t[0], &t[1]).unwrap())),
        (
            "ssim",
            grad_error(&[y.clone(), yt.clone()], |t| ssim(&t[0], &t[1], SsimConstants::PRINTED).unwrap()),
        ),
        (
            "combined",
            grad_error(&[y, yt], |t| combined_loss(&t[0], &t[1], SsimConstants::PRINTED).unwrap().0),
        ),
    ]
}
