//! Five-way geometric augmentation of aligned image pairs.

use crate::error::{Error, Result};
use crate::image::{Angiogram, Dihedral};

/// Identity, horizontal flip, vertical flip, transpose, quarter turn.
pub const AUGMENTATIONS: [Dihedral; 5] = [
    Dihedral::Identity,
    Dihedral::FlipHorizontal,
    Dihedral::FlipVertical,
    Dihedral::Transpose,
    Dihedral::Rot90,
];

pub fn augment(input: &Angiogram, target: &Angiogram) -> Result<Vec<(Angiogram, Angiogram)>> {
    for img in [input, target] {
        if img.width() != img.height() {
            return Err(Error::NonSquare {
                path: img.id().into(),
                width: img.width() as u32,
                height: img.height() as u32,
            });
        }
    }
    if input.width() != target.width() {
        return Err(Error::ShapeMismatch {
            op: "augment",
            left: vec![input.height(), input.width()],
            right: vec![target.height(), target.width()],
        });
    }
    Ok(AUGMENTATIONS.iter().map(|t| (t.apply(input), t.apply(target))).collect())
}

/// [`augment`] on raw square patches of side `size`.
pub fn augment_patch(input: &[f32], target: &[f32], size: usize) -> Vec<(Vec<f32>, Vec<f32>)> {
    AUGMENTATIONS
        .iter()
        .map(|t| (t.apply_slice(input, size, size), t.apply_slice(target, size, size)))
        .collect()
}
