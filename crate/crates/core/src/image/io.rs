use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ColorType, GrayImage, ImageFormat};
use serde::{Deserialize, Serialize};

use super::{Angiogram, IntensityScale};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

/// Sidecar record stored next to every image file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetadata {
    pub id: String,
    pub fov_mm: f64,
    pub intensity_scale: IntensityScale,
}

/// `scan.png` -> `scan.meta`
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

fn format_for(path: &Path) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("png") => Ok(ImageFormat::Png),
        Some("pgm") => Ok(ImageFormat::Pnm),
        _ => Err(Error::format(path, "unsupported raster format (expected .png or .pgm)")),
    }
}

/// Writes the raster (8-bit) and its sidecar. Unit images are stored as
/// `round(v * 255)`; the sidecar records the scale so loading restores it.
pub fn save_image(img: &Angiogram, path: &Path) -> Result<()> {
    let format = format_for(path)?;
    let factor = match img.scale() {
        IntensityScale::Raw255 => 1.0,
        IntensityScale::Unit => 255.0,
    };
    let bytes: Vec<u8> = img
        .pixels()
        .iter()
        .map(|&v| (v * factor).round().clamp(0.0, 255.0) as u8)
        .collect();
    let gray = GrayImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("buffer length matches dimensions");
    let mut encoded = Cursor::new(Vec::new());
    match format {
        ImageFormat::Pnm => {
            let encoder = image::codecs::pnm::PnmEncoder::new(&mut encoded)
                .with_subtype(image::codecs::pnm::PnmSubtype::Graymap(image::codecs::pnm::SampleEncoding::Binary));
            gray.write_with_encoder(encoder)
        }
        _ => gray.write_to(&mut encoded, format),
    }
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    write_atomic(path, encoded.get_ref())?;

    let meta = ImageMetadata {
        id: img.id().to_string(),
        fov_mm: img.fov_mm(),
        intensity_scale: img.scale(),
    };
    let text = toml::to_string(&meta).expect("metadata serializes");
    write_atomic(&sidecar_path(path), text.as_bytes())
}

pub fn load_image(path: &Path) -> Result<Angiogram> {
    let meta = read_metadata(path)?;
    let dynamic = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    if dynamic.color() != ColorType::L8 {
        return Err(Error::MultiChannel {
            path: path.to_path_buf(),
            found: format!("{:?}", dynamic.color()),
        });
    }
    let gray = dynamic.into_luma8();
    let (w, h) = gray.dimensions();
    if w != h {
        return Err(Error::NonSquare {
            path: path.to_path_buf(),
            width: w,
            height: h,
        });
    }
    let pixels: Vec<f32> = match meta.intensity_scale {
        IntensityScale::Raw255 => gray.as_raw().iter().map(|&b| b as f32).collect(),
        IntensityScale::Unit => gray.as_raw().iter().map(|&b| b as f32 / 255.0).collect(),
    };
    Angiogram::new(meta.id, w as usize, h as usize, pixels, meta.intensity_scale, meta.fov_mm)
        .map_err(|e| Error::format(path, e.to_string()))
}

fn read_metadata(path: &Path) -> Result<ImageMetadata> {
    let meta_path = sidecar_path(path);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::format(&meta_path, e.message().to_string()))?;
    for field in ["id", "fov_mm", "intensity_scale"] {
        if !table.contains_key(field) {
            return Err(Error::MissingMetadata {
                path: meta_path,
                field,
            });
        }
    }
    toml::from_str(&text).map_err(|e| Error::format(&meta_path, e.message().to_string()))
}
