//! Direct "same" convolution kernels (stride 1, zero padding k/2).
//!
//! Each loop nest walks output rows as contiguous slices so the innermost
//! loop is an axpy or a dot product the compiler can vectorize. Reduction
//! order is fixed, so results are bit-reproducible.

use super::Scalar;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub batch: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
}

impl ConvDims {
    fn plane(&self) -> usize {
        self.height * self.width
    }

    /// Valid destination/source ranges for a kernel tap offset `d` along an
    /// axis of length `n`: dst in `lo..hi` reads src `dst + d`.
    #[inline]
    fn span(n: usize, d: isize) -> (usize, usize) {
        let lo = (-d).max(0) as usize;
        let hi = (n as isize - d).min(n as isize).max(0) as usize;
        (lo, hi.max(lo))
    }

    fn pad(&self) -> isize {
        (self.kernel / 2) as isize
    }
}

/// `out[n, o] = bias[o] + sum_c sum_k w[o, c, k] * shift_k(x[n, c])`
pub(crate) fn forward<T: Scalar>(dims: ConvDims, x: &[T], w: &[T], bias: &[T]) -> Vec<T> {
    let ConvDims {
        batch,
        in_ch,
        out_ch,
        height,
        width,
        kernel,
    } = dims;
    let plane = dims.plane();
    let pad = dims.pad();
    let mut out = vec![T::zero(); batch * out_ch * plane];
    for n in 0..batch {
        for o in 0..out_ch {
            let out_plane = &mut out[(n * out_ch + o) * plane..][..plane];
            out_plane.iter_mut().for_each(|v| *v = bias[o]);
            for c in 0..in_ch {
                let in_plane = &x[(n * in_ch + c) * plane..][..plane];
                let taps = &w[(o * in_ch + c) * kernel * kernel..][..kernel * kernel];
                for ky in 0..kernel {
                    let dy = ky as isize - pad;
                    let (y0, y1) = ConvDims::span(height, dy);
                    for kx in 0..kernel {
                        let wv = taps[ky * kernel + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        let dx = kx as isize - pad;
                        let (x0, x1) = ConvDims::span(width, dx);
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let dst = &mut out_plane[y * width + x0..y * width + x1];
                            let src_start = (sy * width) as isize + x0 as isize + dx;
                            let src = &in_plane[src_start as usize..src_start as usize + (x1 - x0)];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d = *d + wv * s;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradient with respect to the input: the transposed convolution of
/// `grad_out` with the same taps.
pub(crate) fn backward_input<T: Scalar>(dims: ConvDims, w: &[T], grad_out: &[T]) -> Vec<T> {
    let ConvDims {
        batch,
        in_ch,
        out_ch,
        height,
        width,
        kernel,
    } = dims;
    let plane = dims.plane();
    let pad = dims.pad();
    let mut gx = vec![T::zero(); batch * in_ch * plane];
    for n in 0..batch {
        for c in 0..in_ch {
            let gx_plane = &mut gx[(n * in_ch + c) * plane..][..plane];
            for o in 0..out_ch {
                let go_plane = &grad_out[(n * out_ch + o) * plane..][..plane];
                let taps = &w[(o * in_ch + c) * kernel * kernel..][..kernel * kernel];
                for ky in 0..kernel {
                    let dy = ky as isize - pad;
                    let (y0, y1) = ConvDims::span(height, dy);
                    for kx in 0..kernel {
                        let wv = taps[ky * kernel + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        let dx = kx as isize - pad;
                        let (x0, x1) = ConvDims::span(width, dx);
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let src = &go_plane[y * width + x0..y * width + x1];
                            let dst_start = ((sy * width) as isize + x0 as isize + dx) as usize;
                            let dst = &mut gx_plane[dst_start..dst_start + (x1 - x0)];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d = *d + wv * s;
                            }
                        }
                    }
                }
            }
        }
    }
    gx
}

/// Gradients with respect to weights and bias.
pub(crate) fn backward_params<T: Scalar>(dims: ConvDims, x: &[T], grad_out: &[T]) -> (Vec<T>, Vec<T>) {
    let ConvDims {
        batch,
        in_ch,
        out_ch,
        height,
        width,
        kernel,
    } = dims;
    let plane = dims.plane();
    let pad = dims.pad();
    let mut gw = vec![T::zero(); out_ch * in_ch * kernel * kernel];
    let mut gb = vec![T::zero(); out_ch];
    for n in 0..batch {
        for o in 0..out_ch {
            let go_plane = &grad_out[(n * out_ch + o) * plane..][..plane];
            gb[o] = gb[o] + go_plane.iter().fold(T::zero(), |a, &b| a + b);
            for c in 0..in_ch {
                let in_plane = &x[(n * in_ch + c) * plane..][..plane];
                let taps = &mut gw[(o * in_ch + c) * kernel * kernel..][..kernel * kernel];
                for ky in 0..kernel {
                    let dy = ky as isize - pad;
                    let (y0, y1) = ConvDims::span(height, dy);
                    for kx in 0..kernel {
                        let dx = kx as isize - pad;
                        let (x0, x1) = ConvDims::span(width, dx);
                        let mut acc = T::zero();
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let g = &go_plane[y * width + x0..y * width + x1];
                            let src_start = ((sy * width) as isize + x0 as isize + dx) as usize;
                            let s = &in_plane[src_start..src_start + (x1 - x0)];
                            acc = acc + dot(g, s);
                        }
                        taps[ky * kernel + kx] = taps[ky * kernel + kx] + acc;
                    }
                }
            }
        }
    }
    (gw, gb)
}

/// Dot product with four independent accumulators.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for (j, slot) in acc.iter_mut().enumerate() {
            *slot = *slot + a[4 * i + j] * b[4 * i + j];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 4..a.len() {
        tail = tail + a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
