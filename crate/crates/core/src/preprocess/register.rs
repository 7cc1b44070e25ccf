//! Rigid (similarity) intensity registration.
//!
//! A transform maps a point of the fixed frame to the moving frame:
//!
//! ```text
//! T(p) = s * R(theta) * (p - c_fixed) + c_moving + (tx, ty)
//! ```
//!
//! with points as (x = column, y = row) and `c_*` the image centers.
//! [`register`] searches for the `T` minimizing the mean squared difference
//! between `fixed(p)` and `moving(T(p))` over the pixels where `T(p)` lands
//! inside the moving image. The search is a coarse-to-fine pattern search
//! over a three-level averaging pyramid; each level starts from the result
//! of the previous one and halves its steps until they fall below a floor.

use crate::error::{Error, Result};
use crate::image::{Angiogram, IntensityScale};

use super::resample::bilinear;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub tx: f64,
    pub ty: f64,
    /// Radians.
    pub theta: f64,
    pub scale: f64,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl SimilarityTransform {
    pub const IDENTITY: SimilarityTransform = SimilarityTransform {
        tx: 0.0,
        ty: 0.0,
        theta: 0.0,
        scale: 1.0,
    };

    pub fn new(tx: f64, ty: f64, theta: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) || !tx.is_finite() || !ty.is_finite() || !theta.is_finite() {
            return Err(Error::invalid(format!(
                "invalid similarity transform ({tx}, {ty}, {theta}, {scale})"
            )));
        }
        Ok(SimilarityTransform { tx, ty, theta, scale })
    }

    /// Maps `p` from the frame centered at `from` to the frame centered at `to`.
    #[inline]
    pub fn apply(&self, p: (f64, f64), from: (f64, f64), to: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (p.0 - from.0, p.1 - from.1);
        (
            self.scale * (c * dx - s * dy) + to.0 + self.tx,
            self.scale * (s * dx + c * dy) + to.1 + self.ty,
        )
    }

    /// The transform mapping back, with the roles of the two centers swapped.
    pub fn inverse(&self) -> SimilarityTransform {
        let inv_s = 1.0 / self.scale;
        let (s, c) = (-self.theta).sin_cos();
        SimilarityTransform {
            tx: -inv_s * (c * self.tx - s * self.ty),
            ty: -inv_s * (s * self.tx + c * self.ty),
            theta: -self.theta,
            scale: inv_s,
        }
    }

    /// `self ∘ other` for transforms sharing one center.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        let (s, c) = self.theta.sin_cos();
        SimilarityTransform {
            tx: self.scale * (c * other.tx - s * other.ty) + self.tx,
            ty: self.scale * (s * other.tx + c * other.ty) + self.ty,
            theta: self.theta + other.theta,
            scale: self.scale * other.scale,
        }
    }
}

fn center_of(width: usize, height: usize) -> (f64, f64) {
    ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0)
}

/// Resamples `src` onto an `out_height x out_width` grid:
/// `out(p) = src(T(p))`. Returns the pixels and a validity mask; invalid
/// pixels (T(p) outside `src`) are zero.
pub fn warp(src: &Angiogram, out_height: usize, out_width: usize, t: &SimilarityTransform) -> (Vec<f32>, Vec<bool>) {
    let from = center_of(out_width, out_height);
    let to = center_of(src.width(), src.height());
    let mut out = vec![0.0f32; out_height * out_width];
    let mut valid = vec![false; out_height * out_width];
    for r in 0..out_height {
        for c in 0..out_width {
            let (x, y) = t.apply((c as f64, r as f64), from, to);
            if let Some(v) = bilinear(src.pixels(), src.width(), src.height(), x, y) {
                out[r * out_width + c] = v as f32;
                valid[r * out_width + c] = true;
            }
        }
    }
    (out, valid)
}

/// [`warp`] wrapped as an image in the output frame (same pitch as `src`).
pub fn warp_image(src: &Angiogram, out_height: usize, out_width: usize, t: &SimilarityTransform) -> Result<(Angiogram, Vec<bool>)> {
    let (px, valid) = warp(src, out_height, out_width, t);
    let fov = src.mm_per_pixel() * out_width as f64;
    let img = Angiogram::from_clamped(src.id(), out_width, out_height, px, src.scale(), fov)?;
    Ok((img, valid))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegisterConfig {
    pub levels: usize,
    /// Initial steps at every level, in (level pixels, radians, log-scale).
    pub translation_step: f64,
    pub rotation_step: f64,
    pub log_scale_step: f64,
    /// Search stops once all steps are below these.
    pub min_translation_step: f64,
    pub min_rotation_step: f64,
    pub min_log_scale_step: f64,
    /// Objective evaluations allowed per level.
    pub max_evaluations: usize,
    /// Smallest accepted fraction of fixed pixels that overlap the moving image.
    pub min_overlap: f64,
}

impl Default for RegisterConfig {
    fn default() -> Self {
        RegisterConfig {
            levels: 3,
            translation_step: 1.0,
            rotation_step: 1f64.to_radians(),
            log_scale_step: 0.01,
            min_translation_step: 0.005,
            min_rotation_step: 2e-5,
            min_log_scale_step: 2e-5,
            max_evaluations: 4000,
            min_overlap: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Registration {
    pub transform: SimilarityTransform,
    /// Objective at `transform` on the full-resolution images.
    pub objective: f64,
    /// Objective at the identity on the full-resolution images.
    pub identity_objective: f64,
    pub converged: bool,
    pub evaluations: usize,
}

struct Level {
    fixed: Vec<f32>,
    moving: Vec<f32>,
    fw: usize,
    fh: usize,
    mw: usize,
    mh: usize,
}

impl Level {
    fn objective(&self, t: &SimilarityTransform, min_overlap: f64) -> f64 {
        let from = center_of(self.fw, self.fh);
        let to = center_of(self.mw, self.mh);
        let mut sum = 0.0;
        let mut n = 0usize;
        for r in 0..self.fh {
            for c in 0..self.fw {
                let (x, y) = t.apply((c as f64, r as f64), from, to);
                if let Some(v) = bilinear(&self.moving, self.mw, self.mh, x, y) {
                    let d = v - self.fixed[r * self.fw + c] as f64;
                    sum += d * d;
                    n += 1;
                }
            }
        }
        if n == 0 || (n as f64) < min_overlap * (self.fw * self.fh) as f64 {
            f64::INFINITY
        } else {
            sum / n as f64
        }
    }
}

/// 2x2 block average; odd trailing rows/columns are dropped.
fn halve(px: &[f32], w: usize, h: usize) -> (Vec<f32>, usize, usize) {
    let (nw, nh) = ((w / 2).max(1), (h / 2).max(1));
    if w < 2 || h < 2 {
        return (px.to_vec(), w, h);
    }
    let mut out = vec![0.0; nw * nh];
    for r in 0..nh {
        for c in 0..nw {
            let s = px[2 * r * w + 2 * c] + px[2 * r * w + 2 * c + 1] + px[(2 * r + 1) * w + 2 * c] + px[(2 * r + 1) * w + 2 * c + 1];
            out[r * nw + c] = s / 4.0;
        }
    }
    (out, nw, nh)
}

fn pyramid(fixed: &Angiogram, moving: &Angiogram, levels: usize) -> Vec<Level> {
    let mut out = vec![Level {
        fixed: fixed.pixels().to_vec(),
        moving: moving.pixels().to_vec(),
        fw: fixed.width(),
        fh: fixed.height(),
        mw: moving.width(),
        mh: moving.height(),
    }];
    for _ in 1..levels {
        let prev = out.last().expect("non-empty");
        if prev.fw < 16 || prev.fh < 16 || prev.mw < 16 || prev.mh < 16 {
            break;
        }
        let (f, fw, fh) = halve(&prev.fixed, prev.fw, prev.fh);
        let (m, mw, mh) = halve(&prev.moving, prev.mw, prev.mh);
        out.push(Level {
            fixed: f,
            moving: m,
            fw,
            fh,
            mw,
            mh,
        });
    }
    out
}

/// Parameter vector used by the search: (tx, ty, theta, ln s).
type Params = [f64; 4];

fn to_transform(p: &Params) -> SimilarityTransform {
    SimilarityTransform {
        tx: p[0],
        ty: p[1],
        theta: p[2],
        scale: p[3].exp(),
    }
}

/// Finds the transform aligning `moving` onto `fixed`. Both images must be
/// on the Unit scale.
pub fn register(moving: &Angiogram, fixed: &Angiogram) -> Result<Registration> {
    register_with(moving, fixed, &RegisterConfig::default())
}

pub fn register_with(moving: &Angiogram, fixed: &Angiogram, cfg: &RegisterConfig) -> Result<Registration> {
    if moving.scale() != IntensityScale::Unit || fixed.scale() != IntensityScale::Unit {
        return Err(Error::invalid("registration expects Unit-scale images"));
    }
    let levels = pyramid(fixed, moving, cfg.levels.max(1));
    let full = &levels[0];
    let identity_objective = full.objective(&SimilarityTransform::IDENTITY, cfg.min_overlap);
    if !identity_objective.is_finite() {
        return Err(Error::invalid("images do not overlap at the identity transform"));
    }

    let mut params: Params = [0.0, 0.0, 0.0, 0.0];
    let mut evaluations = 0;
    let mut converged = true;
    for (depth, level) in levels.iter().enumerate().rev() {
        let factor = (1u64 << depth) as f64;
        // translations live in level pixels while searching
        let mut p = params;
        p[0] /= factor;
        p[1] /= factor;
        let mut steps = [cfg.translation_step, cfg.translation_step, cfg.rotation_step, cfg.log_scale_step];
        let floors = [
            cfg.min_translation_step,
            cfg.min_translation_step,
            cfg.min_rotation_step,
            cfg.min_log_scale_step,
        ];
        let mut best = level.objective(&to_transform(&p), cfg.min_overlap);
        let mut level_evals = 1;
        let mut level_done = false;
        while level_evals < cfg.max_evaluations {
            let mut improved = false;
            for i in 0..4 {
                for dir in [1.0, -1.0] {
                    // keep moving in a direction while it pays off
                    loop {
                        let mut cand = p;
                        cand[i] += dir * steps[i];
                        let f = level.objective(&to_transform(&cand), cfg.min_overlap);
                        level_evals += 1;
                        if f < best {
                            best = f;
                            p = cand;
                            improved = true;
                        } else {
                            break;
                        }
                        if level_evals >= cfg.max_evaluations {
                            break;
                        }
                    }
                }
            }
            if !improved {
                if steps.iter().zip(&floors).all(|(s, f)| s < f) {
                    level_done = true;
                    break;
                }
                for (s, f) in steps.iter_mut().zip(&floors) {
                    if *s >= *f {
                        *s /= 2.0;
                    }
                }
            }
        }
        evaluations += level_evals;
        converged &= level_done;
        p[0] *= factor;
        p[1] *= factor;
        params = p;
    }

    let transform = to_transform(&params);
    let objective = full.objective(&transform, cfg.min_overlap);
    evaluations += 1;
    if !(objective <= identity_objective) {
        return Ok(Registration {
            transform: SimilarityTransform::IDENTITY,
            objective: identity_objective,
            identity_objective,
            converged: false,
            evaluations,
        });
    }
    Ok(Registration {
        transform,
        objective,
        identity_objective,
        converged,
        evaluations,
    })
}
