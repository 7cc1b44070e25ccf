//! Pair preparation: upsampling, registration, cropping to the common
//! field, patch tiling and augmentation.

mod augment;
mod patches;
mod rect;
mod register;
mod resample;

pub use augment::{augment, augment_patch, AUGMENTATIONS};
pub use patches::{
    extract_patches, tile_origins, PatchSet, DEFAULT_PATCH_SIZE, DEFAULT_STRIDE, PATCH_FORMAT_VERSION, PATCH_MAGIC,
};
pub use rect::{max_inscribed_rect, Rect};
pub use register::{register, register_with, warp, warp_image, RegisterConfig, Registration, SimilarityTransform};
pub use resample::{bicubic_upsample, bilinear, cubic_weight, decimate, CUBIC_A};

use crate::error::{Error, Result};
use crate::image::{Angiogram, IntensityScale, PixelRegion};

/// A registered, cropped input/target pair.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    pub input: Angiogram,
    pub target: Angiogram,
    pub registration: Option<Registration>,
    /// Crop rectangle in target coordinates.
    pub crop: Rect,
}

/// Brings `input` onto the grid of `target`: upsampling to the target size
/// when it is an integer multiple smaller, then (unless `aligned`)
/// registering, resampling into the target frame and cropping both images
/// to the largest rectangle where the resampled input is defined.
pub fn prepare_pair(input: &Angiogram, target: &Angiogram, aligned: bool) -> Result<PreparedPair> {
    let input = input.to_unit();
    let target = target.to_unit();
    let input = if input.width() < target.width() {
        if target.width() % input.width() != 0 || target.height() != input.height() * (target.width() / input.width()) {
            return Err(Error::invalid(format!(
                "input {}x{} is not an integer downscale of target {}x{}",
                input.height(),
                input.width(),
                target.height(),
                target.width()
            )));
        }
        bicubic_upsample(&input, target.width() / input.width())?
    } else {
        input
    };
    if (input.height(), input.width()) != (target.height(), target.width()) && aligned {
        return Err(Error::ShapeMismatch {
            op: "prepare_pair",
            left: vec![input.height(), input.width()],
            right: vec![target.height(), target.width()],
        });
    }
    if aligned {
        let crop = Rect {
            top: 0,
            left: 0,
            height: target.height(),
            width: target.width(),
        };
        return Ok(PreparedPair {
            input,
            target,
            registration: None,
            crop,
        });
    }
    let reg = register(&input, &target)?;
    let (warped, valid) = warp_image(&input, target.height(), target.width(), &reg.transform)?;
    let region = PixelRegion::from_mask(&valid, target.height(), target.width())?;
    let crop = max_inscribed_rect(&region)?;
    let cut = |img: &Angiogram| img.crop(crop.top, crop.left, crop.height, crop.width);
    let input = cut(&warped)?;
    let target = cut(&target)?;
    debug_assert_eq!(input.scale(), IntensityScale::Unit);
    Ok(PreparedPair {
        input,
        target,
        registration: Some(reg),
        crop,
    })
}
