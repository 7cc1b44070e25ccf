//! Convolution helpers on f64 buffers with clamped (replicated) edges.

#[inline]
pub(crate) fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Normalized 1-D Gaussian over `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Support radius used for a Gaussian of width `sigma`.
pub fn gaussian_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil().max(1.0) as usize
}

/// Correlates rows with `kx` then columns with `ky` (both odd length).
pub fn separable(px: &[f64], h: usize, w: usize, kx: &[f64], ky: &[f64]) -> Vec<f64> {
    let (rx, ry) = ((kx.len() / 2) as isize, (ky.len() / 2) as isize);
    let mut tmp = vec![0.0; h * w];
    for r in 0..h {
        let row = &px[r * w..(r + 1) * w];
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kx.iter().enumerate() {
                acc += kv * row[clamp_index(c as isize + k as isize - rx, w)];
            }
            tmp[r * w + c] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in ky.iter().enumerate() {
                acc += kv * tmp[clamp_index(r as isize + k as isize - ry, h) * w + c];
            }
            out[r * w + c] = acc;
        }
    }
    out
}

/// Full 2-D correlation with a square odd-sized kernel.
pub fn correlate(px: &[f64], h: usize, w: usize, kernel: &[f64], size: usize) -> Vec<f64> {
    let rad = (size / 2) as isize;
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for kr in 0..size {
                let rr = clamp_index(r as isize + kr as isize - rad, h);
                let krow = &kernel[kr * size..(kr + 1) * size];
                let prow = &px[rr * w..(rr + 1) * w];
                for (kc, &kv) in krow.iter().enumerate() {
                    acc += kv * prow[clamp_index(c as isize + kc as isize - rad, w)];
                }
            }
            out[r * w + c] = acc;
        }
    }
    out
}

/// Gaussian blur with clamped edges; keeps scale and geometry.
pub fn gaussian_blur(img: &crate::image::Angiogram, sigma: f64) -> crate::error::Result<crate::image::Angiogram> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(crate::error::Error::invalid(format!("blur sigma must be positive, got {sigma}")));
    }
    let k = gaussian_kernel(sigma, gaussian_radius(sigma));
    let px: Vec<f64> = img.pixels().iter().map(|&v| v as f64).collect();
    let out = separable(&px, img.height(), img.width(), &k, &k);
    img.map_pixels(out.into_iter().map(|v| v as f32).collect())
}
