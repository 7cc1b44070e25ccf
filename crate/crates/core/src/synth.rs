//! Synthetic paired angiograms: a rendered vessel tree as the clean image
//! and an undersampled, blurred, noisy copy on the same grid.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::baselines::gaussian_blur;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::image::{load_image, save_image, Angiogram, IntensityScale};
use crate::preprocess::{bicubic_upsample, decimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VesselTreeSpec {
    pub seed: u64,
    /// Bifurcation generations below each root vessel.
    pub branch_depth: u32,
    /// Random spread added to each branching angle, degrees.
    pub branch_angle_jitter: f64,
    /// Gaussian cross-section width of a root vessel, pixels.
    pub vessel_sigma_px: f64,
    /// Capillary segments per pixel, relative to a dense bed at 1.0.
    pub capillary_density: f64,
    pub faz_diameter_mm: f64,
}

impl Default for VesselTreeSpec {
    fn default() -> Self {
        VesselTreeSpec {
            seed: 0,
            branch_depth: 4,
            branch_angle_jitter: 15.0,
            vessel_sigma_px: 1.2,
            capillary_density: 0.4,
            faz_diameter_mm: 0.9,
        }
    }
}

impl VesselTreeSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("branch_angle_jitter", self.branch_angle_jitter),
            ("vessel_sigma_px", self.vessel_sigma_px),
            ("capillary_density", self.capillary_density),
            ("faz_diameter_mm", self.faz_diameter_mm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.branch_depth == 0 {
            return Err(Error::invalid("branch_depth must be positive"));
        }
        Ok(())
    }
}

/// Degradation applied to the clean image, in order: keep every
/// `factor`-th line, bicubic back to full size, blur, add noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Degradation {
    pub factor: usize,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
}

impl Default for Degradation {
    fn default() -> Self {
        Degradation {
            factor: 2,
            blur_sigma: 0.7,
            noise_sigma: 0.06,
        }
    }
}

/// One straight piece of a vessel centerline.
#[derive(Debug, Clone, Copy)]
struct Piece {
    a: (f64, f64),
    b: (f64, f64),
    sigma: f64,
    amplitude: f64,
}

struct Canvas {
    n: usize,
    center: (f64, f64),
    faz_radius: f64,
    pieces: Vec<Piece>,
}

impl Canvas {
    fn inside(&self, p: (f64, f64)) -> bool {
        let m = -2.0;
        p.0 >= m && p.1 >= m && p.0 <= self.n as f64 + 1.0 && p.1 <= self.n as f64 + 1.0
    }

    fn near_faz(&self, p: (f64, f64), margin: f64) -> bool {
        let (dx, dy) = (p.0 - self.center.0, p.1 - self.center.1);
        (dx * dx + dy * dy).sqrt() < self.faz_radius + margin
    }

    /// Grows one vessel from `p` along `angle`, then bifurcates.
    #[allow(clippy::too_many_arguments)]
    fn grow(
        &mut self,
        rng: &mut ChaCha8Rng,
        spec: &VesselTreeSpec,
        mut p: (f64, f64),
        mut angle: f64,
        sigma: f64,
        amplitude: f64,
        depth: u32,
    ) {
        let length = self.n as f64 * rng.gen_range(0.18..0.32) * 0.85f64.powi(depth as i32);
        let bend = Normal::new(0.0, 4f64.to_radians()).expect("valid normal");
        let mut travelled = 0.0;
        while travelled < length {
            angle += bend.sample(rng);
            let q = (p.0 + angle.cos(), p.1 + angle.sin());
            if !self.inside(q) || self.near_faz(q, 2.0 * sigma) {
                return;
            }
            self.pieces.push(Piece {
                a: p,
                b: q,
                sigma,
                amplitude,
            });
            p = q;
            travelled += 1.0;
        }
        if depth >= spec.branch_depth {
            return;
        }
        let child_sigma = sigma * 2f64.powf(-1.0 / 3.0);
        let child_amp = amplitude * 0.92;
        let jitter = spec.branch_angle_jitter.to_radians();
        for side in [-1.0, 1.0] {
            let spread = rng.gen_range(25f64..40.0).to_radians() + rng.gen_range(-jitter..=jitter);
            self.grow(rng, spec, p, angle + side * spread, child_sigma, child_amp, depth + 1);
        }
    }

    fn render(&self) -> Vec<f64> {
        let n = self.n;
        let mut px = vec![0.0f64; n * n];
        for piece in &self.pieces {
            let reach = 3.0 * piece.sigma;
            let lo_x = (piece.a.0.min(piece.b.0) - reach).floor().max(0.0) as usize;
            let hi_x = ((piece.a.0.max(piece.b.0) + reach).ceil().max(0.0) as usize).min(n - 1);
            let lo_y = (piece.a.1.min(piece.b.1) - reach).floor().max(0.0) as usize;
            let hi_y = ((piece.a.1.max(piece.b.1) + reach).ceil().max(0.0) as usize).min(n - 1);
            let (dx, dy) = (piece.b.0 - piece.a.0, piece.b.1 - piece.a.1);
            let len2 = dx * dx + dy * dy;
            let inv = 1.0 / (2.0 * piece.sigma * piece.sigma);
            for y in lo_y..=hi_y {
                for x in lo_x..=hi_x {
                    let (px_, py_) = (x as f64 - piece.a.0, y as f64 - piece.a.1);
                    let t = if len2 > 0.0 {
                        ((px_ * dx + py_ * dy) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let (ex, ey) = (px_ - t * dx, py_ - t * dy);
                    let v = piece.amplitude * (-(ex * ex + ey * ey) * inv).exp();
                    let cell = &mut px[y * n + x];
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
        }
        px
    }
}

fn quantize(v: f64) -> f32 {
    ((v.clamp(0.0, 1.0) * 255.0).round() / 255.0) as f32
}

/// Clean vessel image on the Unit scale, values on the 1/255 lattice.
pub fn render_clean(spec: &VesselTreeSpec, fov_mm: f64, size_px: usize) -> Result<Angiogram> {
    spec.validate()?;
    if size_px < 8 {
        return Err(Error::invalid(format!("synthetic images need at least 8 pixels, got {size_px}")));
    }
    if !(fov_mm > 0.0 && fov_mm.is_finite()) {
        return Err(Error::invalid(format!("field of view must be positive, got {fov_mm}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = size_px as f64;
    let center = ((n - 1.0) / 2.0, (n - 1.0) / 2.0);
    let faz_radius = spec.faz_diameter_mm / 2.0 * n / fov_mm;
    let mut canvas = Canvas {
        n: size_px,
        center,
        faz_radius,
        pieces: Vec::new(),
    };

    let roots = rng.gen_range(4..=6);
    for k in 0..roots {
        // roots spread around the border, aimed past the center
        let phase = (k as f64 + rng.gen_range(0.0..0.8)) / roots as f64 * std::f64::consts::TAU;
        let start = (center.0 + 0.5 * n * phase.cos() * 1.05, center.1 + 0.5 * n * phase.sin() * 1.05);
        let start = (start.0.clamp(0.0, n - 1.0), start.1.clamp(0.0, n - 1.0));
        let inward = (center.1 - start.1).atan2(center.0 - start.0);
        let angle = inward + rng.gen_range(20f64..40.0).to_radians() * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let amp = rng.gen_range(0.85..1.0);
        canvas.grow(&mut rng, spec, start, angle, spec.vessel_sigma_px, amp, 0);
    }

    let capillaries = (spec.capillary_density * n * n / 60.0).round() as usize;
    let cap_sigma = 0.55 * spec.vessel_sigma_px;
    for _ in 0..capillaries {
        let mut p = (rng.gen_range(0.0..n), rng.gen_range(0.0..n));
        let mut angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let steps = rng.gen_range(5..12);
        let amp = rng.gen_range(0.35..0.55);
        for _ in 0..steps {
            angle += rng.gen_range(-0.3..0.3);
            let q = (p.0 + angle.cos(), p.1 + angle.sin());
            if !canvas.inside(q) || canvas.near_faz(q, 2.0 * cap_sigma) {
                break;
            }
            canvas.pieces.push(Piece {
                a: p,
                b: q,
                sigma: cap_sigma,
                amplitude: amp,
            });
            p = q;
        }
    }

    let mut px = canvas.render();
    for y in 0..size_px {
        for x in 0..size_px {
            if canvas.near_faz((x as f64, y as f64), 0.0) {
                px[y * size_px + x] = 0.0;
            }
        }
    }
    let pixels = px.into_iter().map(quantize).collect();
    Angiogram::new(
        format!("clean{:016x}", spec.seed),
        size_px,
        size_px,
        pixels,
        IntensityScale::Unit,
        fov_mm,
    )
}

/// Degraded copy of `clean` on the same grid.
pub fn degrade(clean: &Angiogram, d: &Degradation, seed: u64) -> Result<Angiogram> {
    if d.factor == 0 || clean.width() % d.factor != 0 || clean.height() % d.factor != 0 {
        return Err(Error::invalid(format!(
            "degradation factor {} must divide the image size {}x{}",
            d.factor,
            clean.height(),
            clean.width()
        )));
    }
    let sparse = decimate(clean, d.factor)?;
    let mut img = bicubic_upsample(&sparse, d.factor)?;
    if d.blur_sigma > 0.0 {
        img = gaussian_blur(&img, d.blur_sigma)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let noise = Normal::new(0.0, d.noise_sigma.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let px = img
        .pixels()
        .iter()
        .map(|&v| quantize(v as f64 + noise.sample(&mut rng)))
        .collect();
    Ok(img.map_pixels(px)?.with_id(clean.id().replacen("clean", "degraded", 1)))
}

/// (clean, degraded) for one seed.
pub fn generate_pair(spec: &VesselTreeSpec, fov_mm: f64, size_px: usize) -> Result<(Angiogram, Angiogram)> {
    generate_pair_with(spec, &Degradation::default(), fov_mm, size_px)
}

pub fn generate_pair_with(
    spec: &VesselTreeSpec,
    degradation: &Degradation,
    fov_mm: f64,
    size_px: usize,
) -> Result<(Angiogram, Angiogram)> {
    let clean = render_clean(spec, fov_mm, size_px)?;
    let degraded = degrade(&clean, degradation, spec.seed)?;
    Ok((clean, degraded))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub id: String,
    pub seed: u64,
    /// Paths relative to the manifest's directory.
    pub clean: PathBuf,
    pub degraded: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub master_seed: u64,
    /// Degraded and clean images share one pixel grid.
    pub aligned: bool,
    pub fov_mm: f64,
    pub size_px: usize,
    pub spec: VesselTreeSpec,
    pub degradation: Degradation,
    #[serde(default)]
    pub pairs: Vec<PairEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.toml";

/// Settings of a corpus, everything except where it goes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub n: usize,
    pub master_seed: u64,
    pub fov_mm: f64,
    pub size_px: usize,
    pub tree: VesselTreeSpec,
    pub degradation: Degradation,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n: 20,
            master_seed: 0,
            fov_mm: 3.0,
            size_px: 64,
            tree: VesselTreeSpec::default(),
            degradation: Degradation::default(),
        }
    }
}

impl Manifest {
    /// Plans a corpus: pair seeds are drawn from the master seed in order.
    pub fn plan(c: &CorpusSpec) -> Manifest {
        let mut rng = ChaCha8Rng::seed_from_u64(c.master_seed);
        let pairs = (0..c.n)
            .map(|i| {
                let id = format!("pair{i:04}");
                PairEntry {
                    // TOML integers are signed 64-bit
                    seed: rng.gen_range(0..=i64::MAX as u64),
                    clean: PathBuf::from("clean").join(format!("{id}.png")),
                    degraded: PathBuf::from("degraded").join(format!("{id}.png")),
                    id,
                }
            })
            .collect();
        Manifest {
            master_seed: c.master_seed,
            aligned: true,
            fov_mm: c.fov_mm,
            size_px: c.size_px,
            spec: c.tree,
            degradation: c.degradation,
            pairs,
        }
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::format(path, e.to_string()))?;
        write_atomic(path, text.as_bytes())
    }

    /// Renders one listed pair.
    pub fn generate(&self, entry: &PairEntry) -> Result<(Angiogram, Angiogram)> {
        let spec = VesselTreeSpec {
            seed: entry.seed,
            ..self.spec
        };
        let (clean, degraded) = generate_pair_with(&spec, &self.degradation, self.fov_mm, self.size_px)?;
        Ok((
            clean.with_id(format!("{}_clean", entry.id)),
            degraded.with_id(format!("{}_degraded", entry.id)),
        ))
    }

    /// Writes every pair and the manifest below `dir`.
    pub fn write_corpus(&self, dir: &Path) -> Result<()> {
        for sub in ["clean", "degraded"] {
            let p = dir.join(sub);
            if !p.is_dir() {
                std::fs::create_dir(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        for entry in &self.pairs {
            let (clean, degraded) = self.generate(entry)?;
            save_image(&clean, &dir.join(&entry.clean))?;
            save_image(&degraded, &dir.join(&entry.degraded))?;
        }
        self.save(&dir.join(MANIFEST_NAME))
    }

    /// Loads the (clean, degraded) images of one entry.
    pub fn load_pair(&self, dir: &Path, entry: &PairEntry) -> Result<(Angiogram, Angiogram)> {
        Ok((load_image(&dir.join(&entry.clean))?, load_image(&dir.join(&entry.degraded))?))
    }
}

/// Generates a corpus into `out_dir`, which is created if missing (its
/// parent must exist).
pub fn make_corpus(c: &CorpusSpec, out_dir: &Path) -> Result<Manifest> {
    c.tree.validate()?;
    if !out_dir.is_dir() {
        std::fs::create_dir(out_dir).map_err(|e| Error::io(out_dir, e))?;
    }
    let manifest = Manifest::plan(c);
    manifest.write_corpus(out_dir)?;
    Ok(manifest)
}
