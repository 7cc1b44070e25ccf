//! Angiogram images, pixel regions and intensity normalization.

mod io;

pub use io::{load_image, save_image, sidecar_path, ImageMetadata};

use serde::{Deserialize, Serialize};

use crate::error::{Edge, Error, Flagged, Result, Warning};

/// Range the pixel values of an [`Angiogram`] live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityScale {
    /// `[0, 255]`
    Raw255,
    /// `[0, 1]`
    Unit,
}

impl IntensityScale {
    pub fn max_value(self) -> f32 {
        match self {
            IntensityScale::Raw255 => 255.0,
            IntensityScale::Unit => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IntensityScale::Raw255 => "raw255",
            IntensityScale::Unit => "unit",
        }
    }
}

/// A 2-D grayscale en-face angiogram.
///
/// Pixels are row-major. The field of view describes the physical width of
/// the scan, so `fov_mm / width` is the pixel pitch in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Angiogram {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
    scale: IntensityScale,
    fov_mm: f64,
    id: String,
}

impl Angiogram {
    pub fn new(
        id: impl Into<String>,
        width: usize,
        height: usize,
        pixels: Vec<f32>,
        scale: IntensityScale,
        fov_mm: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image must be at least 1x1, got {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "pixel buffer has {} values, expected {}",
                pixels.len(),
                width * height
            )));
        }
        if !(fov_mm.is_finite() && fov_mm > 0.0) {
            return Err(Error::invalid(format!("field of view must be positive, got {fov_mm}")));
        }
        let max = scale.max_value();
        if let Some(bad) = pixels.iter().find(|&&v| !(0.0..=max).contains(&v)) {
            return Err(Error::invalid(format!(
                "pixel value {bad} outside the {} range [0, {max}]",
                scale.as_str()
            )));
        }
        Ok(Angiogram {
            width,
            height,
            pixels,
            scale,
            fov_mm,
            id: id.into(),
        })
    }

    /// Builds an image from arbitrary values, clamping them into `scale`.
    pub fn from_clamped(
        id: impl Into<String>,
        width: usize,
        height: usize,
        mut pixels: Vec<f32>,
        scale: IntensityScale,
        fov_mm: f64,
    ) -> Result<Self> {
        let max = scale.max_value();
        for v in &mut pixels {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, max) };
        }
        Self::new(id, width, height, pixels, scale, fov_mm)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    pub fn scale(&self) -> IntensityScale {
        self.scale
    }

    pub fn fov_mm(&self) -> f64 {
        self.fov_mm
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mm_per_pixel(&self) -> f64 {
        self.fov_mm / self.width as f64
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Same geometry and metadata, new pixel values (clamped to the scale).
    pub fn map_pixels(&self, pixels: Vec<f32>) -> Result<Self> {
        Self::from_clamped(self.id.clone(), self.width, self.height, pixels, self.scale, self.fov_mm)
    }

    /// Multiplies a Unit image by 255.
    pub fn to_raw255(&self) -> Angiogram {
        match self.scale {
            IntensityScale::Raw255 => self.clone(),
            IntensityScale::Unit => Angiogram {
                pixels: self.pixels.iter().map(|v| (v * 255.0).clamp(0.0, 255.0)).collect(),
                scale: IntensityScale::Raw255,
                ..self.clone()
            },
        }
    }

    /// Divides a Raw255 image by 255 (no re-ranging, unlike [`normalize_unit`]).
    pub fn to_unit(&self) -> Angiogram {
        match self.scale {
            IntensityScale::Unit => self.clone(),
            IntensityScale::Raw255 => Angiogram {
                pixels: self.pixels.iter().map(|v| (v / 255.0).clamp(0.0, 1.0)).collect(),
                scale: IntensityScale::Unit,
                ..self.clone()
            },
        }
    }

    /// Axis-aligned sub-image. The field of view shrinks with the width so
    /// the pixel pitch is preserved.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Angiogram> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(Error::invalid(format!(
                "crop ({top}, {left}, {height}, {width}) outside {}x{} image",
                self.height, self.width
            )));
        }
        let mut pixels = Vec::with_capacity(height * width);
        for r in top..top + height {
            let start = r * self.width + left;
            pixels.extend_from_slice(&self.pixels[start..start + width]);
        }
        Ok(Angiogram {
            width,
            height,
            pixels,
            scale: self.scale,
            fov_mm: self.mm_per_pixel() * width as f64,
            id: self.id.clone(),
        })
    }

    /// Geometric center in (row, col) pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        ((self.height as f64 - 1.0) / 2.0, (self.width as f64 - 1.0) / 2.0)
    }
}

/// Eq. (S - min) / (max - min); the result is on the Unit scale.
///
/// A constant image has no range to stretch: it maps to zeros and the
/// result carries [`Warning::ConstantImage`].
pub fn normalize_unit(img: &Angiogram) -> Flagged<Angiogram> {
    let (min, max) = img
        .pixels
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let out = |pixels| Angiogram {
        pixels,
        scale: IntensityScale::Unit,
        ..img.clone()
    };
    if max <= min {
        return Flagged::warn(out(vec![0.0; img.pixels.len()]), Warning::ConstantImage);
    }
    let range = (max - min) as f64;
    let pixels = img
        .pixels
        .iter()
        .map(|&v| (((v - min) as f64) / range).clamp(0.0, 1.0) as f32)
        .collect();
    Flagged::ok(out(pixels))
}

/// A set of pixel coordinates of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelRegion {
    coords: Vec<(usize, usize)>,
    height: usize,
    width: usize,
}

impl PixelRegion {
    pub fn new(coords: Vec<(usize, usize)>, height: usize, width: usize) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if let Some(&(r, c)) = coords.iter().find(|&&(r, c)| r >= height || c >= width) {
            return Err(Error::invalid(format!("region pixel ({r}, {c}) outside {height}x{width}")));
        }
        Ok(PixelRegion {
            coords,
            height,
            width,
        })
    }

    /// Region from a row-major boolean mask.
    pub fn from_mask(mask: &[bool], height: usize, width: usize) -> Result<Self> {
        if mask.len() != height * width {
            return Err(Error::invalid("mask size does not match its dimensions"));
        }
        let coords = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| (i / width, i % width))
            .collect();
        Self::new(coords, height, width)
    }

    pub fn coords(&self) -> &[(usize, usize)] {
        &self.coords
    }

    pub fn pixel_count(&self) -> usize {
        self.coords.len()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn to_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.height * self.width];
        for &(r, c) in &self.coords {
            mask[r * self.width + c] = true;
        }
        mask
    }
}

/// All pixels within `diameter_mm / 2` of `center` (row, col), converting
/// millimeters to pixels with the image's width-based pitch.
pub fn circular_region(img: &Angiogram, center: (f64, f64), diameter_mm: f64) -> Result<PixelRegion> {
    if !(diameter_mm.is_finite() && diameter_mm > 0.0) {
        return Err(Error::invalid(format!("diameter must be positive, got {diameter_mm}")));
    }
    let (cr, cc) = center;
    let (h, w) = (img.height as f64, img.width as f64);
    if !(cr >= 0.0 && cr <= h - 1.0 && cc >= 0.0 && cc <= w - 1.0) {
        return Err(Error::invalid(format!("center ({cr}, {cc}) outside the image")));
    }
    let radius = radius_px(img, diameter_mm);
    let r_min = (cr - radius).ceil();
    let r_max = (cr + radius).floor();
    let c_min = (cc - radius).ceil();
    let c_max = (cc + radius).floor();
    if r_min < 0.0 {
        return Err(Error::RegionOutOfBounds(Edge::Top));
    }
    if r_max > h - 1.0 {
        return Err(Error::RegionOutOfBounds(Edge::Bottom));
    }
    if c_min < 0.0 {
        return Err(Error::RegionOutOfBounds(Edge::Left));
    }
    if c_max > w - 1.0 {
        return Err(Error::RegionOutOfBounds(Edge::Right));
    }
    let r2 = radius * radius;
    let mut coords = Vec::new();
    for r in r_min as usize..=r_max as usize {
        let dr = r as f64 - cr;
        for c in c_min as usize..=c_max as usize {
            let dc = c as f64 - cc;
            if dr * dr + dc * dc <= r2 {
                coords.push((r, c));
            }
        }
    }
    PixelRegion::new(coords, img.height, img.width)
}

/// Radius in pixels of a circle of the given physical diameter.
pub fn radius_px(img: &Angiogram, diameter_mm: f64) -> f64 {
    (diameter_mm / 2.0) / img.mm_per_pixel()
}

/// The eight symmetries of the square pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dihedral {
    Identity,
    FlipHorizontal,
    FlipVertical,
    Transpose,
    /// Counter-clockwise quarter turn.
    Rot90,
    Rot180,
    Rot270,
    AntiTranspose,
}

impl Dihedral {
    pub const ALL: [Dihedral; 8] = [
        Dihedral::Identity,
        Dihedral::FlipHorizontal,
        Dihedral::FlipVertical,
        Dihedral::Transpose,
        Dihedral::Rot90,
        Dihedral::Rot180,
        Dihedral::Rot270,
        Dihedral::AntiTranspose,
    ];

    /// Output dimensions (height, width) for an input of the given size.
    pub fn output_dims(self, height: usize, width: usize) -> (usize, usize) {
        match self {
            Dihedral::Identity | Dihedral::FlipHorizontal | Dihedral::FlipVertical | Dihedral::Rot180 => {
                (height, width)
            }
            _ => (width, height),
        }
    }

    /// Where input pixel (r, c) lands in the output.
    pub fn map_coord(self, r: usize, c: usize, height: usize, width: usize) -> (usize, usize) {
        match self {
            Dihedral::Identity => (r, c),
            Dihedral::FlipHorizontal => (r, width - 1 - c),
            Dihedral::FlipVertical => (height - 1 - r, c),
            Dihedral::Transpose => (c, r),
            Dihedral::Rot90 => (width - 1 - c, r),
            Dihedral::Rot180 => (height - 1 - r, width - 1 - c),
            Dihedral::Rot270 => (c, height - 1 - r),
            Dihedral::AntiTranspose => (width - 1 - c, height - 1 - r),
        }
    }

    pub fn apply_slice<T: Copy + Default>(self, data: &[T], height: usize, width: usize) -> Vec<T> {
        let (oh, ow) = self.output_dims(height, width);
        let mut out = vec![T::default(); oh * ow];
        for r in 0..height {
            for c in 0..width {
                let (or, oc) = self.map_coord(r, c, height, width);
                out[or * ow + oc] = data[r * width + c];
            }
        }
        out
    }

    pub fn apply(self, img: &Angiogram) -> Angiogram {
        let (oh, ow) = self.output_dims(img.height, img.width);
        Angiogram {
            width: ow,
            height: oh,
            pixels: self.apply_slice(&img.pixels, img.height, img.width),
            ..img.clone()
        }
    }
}
